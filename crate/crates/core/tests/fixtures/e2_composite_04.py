	def make_x():
	    d1 = diagonal
	    d2 = reflect_vertical(d1)
	    return add(d1, d2)

	def make_double_vertical():
	    return add(line_vertical, reflect_vertical(line_vertical))

	def make_all_ones():
	    return invert(blank)

	def make_center_pixel():
	    return intersect(diagonal, line_horizontal)

	def make_extra_pixel():
	    return intersect(line_vertical, reflect_horizontal(line_horizontal))

	def reconstructed():
	    full = make_all_ones()
	    no_x = subtract(full, make_x())
	    return add(add(no_x, make_center_pixel()), make_extra_pixel())
