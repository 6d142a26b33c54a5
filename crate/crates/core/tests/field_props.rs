use kdesign::gf2field::{clmul64, field_spec, gf_add, gf_inv, gf_mul, gf_pow, poly_divmod, FieldElem, FieldSpec};
use proptest::prelude::*;

fn elems(m: u32) -> impl Strategy<Value = (FieldSpec, u64, u64, u64)> {
    let mask = if m == 64 { u64::MAX } else { (1u64 << m) - 1 };
    (any::<u64>(), any::<u64>(), any::<u64>()).prop_map(move |(a, b, c)| (field_spec(m).unwrap(), a & mask, b & mask, c & mask))
}

fn el(f: &FieldSpec, v: u64) -> FieldElem {
    f.elem(v).unwrap()
}

proptest! {
    #[test]
    fn product_is_remainder_of_carryless_product((f, a, b, _) in (1u32..=64).prop_flat_map(elems)) {
        let got = gf_mul(el(&f, a), el(&f, b), &f).unwrap().bits();
        prop_assert_eq!(got as u128, poly_divmod(clmul64(a, b), f.p_bits()).1);
    }

    #[test]
    fn field_axioms((f, a, b, c) in (1u32..=64).prop_flat_map(elems)) {
        let mul = |x: u64, y: u64| gf_mul(el(&f, x), el(&f, y), &f).unwrap().bits();
        let add = |x: u64, y: u64| gf_add(el(&f, x), el(&f, y)).unwrap().bits();
        prop_assert_eq!(mul(a, b), mul(b, a));
        prop_assert_eq!(mul(mul(a, b), c), mul(a, mul(b, c)));
        prop_assert_eq!(mul(a, add(b, c)), add(mul(a, b), mul(a, c)));
        prop_assert_eq!(mul(a, 1), a);
        if a != 0 {
            let inv = gf_inv(el(&f, a), &f).unwrap().bits();
            prop_assert_eq!(mul(a, inv), 1);
        }
    }

    #[test]
    fn frobenius_order_fixes_every_element((f, a, _, _) in (1u32..=64).prop_flat_map(elems)) {
        // a^(2^m) = a in GF(2^m).
        prop_assert_eq!(gf_pow(el(&f, a), f.order(), &f).unwrap().bits(), a);
    }
}
