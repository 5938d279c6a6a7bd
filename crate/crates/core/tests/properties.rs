use pbt_core::{evaluate, Grid, Library, Program};
use proptest::prelude::*;

fn grid() -> impl Strategy<Value = Grid> {
    any::<u128>().prop_map(|bits| Grid::from_bits(bits & ((1u128 << 100) - 1)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn involutions(a in grid()) {
        prop_assert_eq!(a.invert().invert(), a);
        prop_assert_eq!(a.reflect_horizontal().reflect_horizontal(), a);
        prop_assert_eq!(a.reflect_vertical().reflect_vertical(), a);
        prop_assert_eq!(a.reflect_diag().reflect_diag(), a);
    }

    #[test]
    fn commutativity(a in grid(), b in grid()) {
        prop_assert_eq!(a.add(b), b.add(a));
        prop_assert_eq!(a.intersect(b), b.intersect(a));
    }

    #[test]
    fn subtract_is_intersect_with_complement(a in grid(), b in grid()) {
        prop_assert_eq!(a.subtract(b), a.intersect(b.invert()));
    }

    #[test]
    fn de_morgan(a in grid(), b in grid()) {
        prop_assert_eq!(a.add(b).invert(), a.invert().intersect(b.invert()));
        prop_assert_eq!(a.intersect(b).invert(), a.invert().add(b.invert()));
    }

    #[test]
    fn cells_follow_the_flip_definitions(a in grid(), r in 0usize..10, c in 0usize..10) {
        prop_assert_eq!(a.reflect_horizontal().get(r, c), a.get(9 - r, c));
        prop_assert_eq!(a.reflect_vertical().get(r, c), a.get(r, 9 - c));
        prop_assert_eq!(a.reflect_diag().get(r, c), a.get(c, r));
        prop_assert_eq!(a.invert().get(r, c), !a.get(r, c));
    }

    #[test]
    fn keys_round_trip(a in grid()) {
        let key = a.key();
        prop_assert_eq!(key.len(), 100);
        prop_assert_eq!(Grid::from_key(&key).unwrap(), a);
        let json = serde_json::to_string(&a).unwrap();
        prop_assert_eq!(serde_json::from_str::<Grid>(&json).unwrap(), a);
    }
}

fn program() -> impl Strategy<Value = Program> {
    let leaf = prop::sample::select(pbt_core::Primitive::ALL.to_vec()).prop_map(Program::prim);
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (prop::sample::select(pbt_core::UnaryOp::ALL.to_vec()), inner.clone())
                .prop_map(|(op, a)| Program::unary(op, a)),
            (prop::sample::select(pbt_core::BinaryOp::ALL.to_vec()), inner.clone(), inner)
                .prop_map(|(op, a, b)| Program::binary(op, a, b)),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2_000))]

    #[test]
    fn programs_print_and_parse_back(p in program()) {
        let text = p.to_string();
        let back = Program::parse(&text).unwrap();
        prop_assert_eq!(&back, &p);
        let lib = Library::new();
        prop_assert_eq!(evaluate(&back, &lib).unwrap(), evaluate(&p, &lib).unwrap());
        let json = serde_json::to_string(&p).unwrap();
        prop_assert_eq!(serde_json::from_str::<Program>(&json).unwrap(), p);
    }
}
