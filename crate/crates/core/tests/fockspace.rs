use fockforge::fockspace::{
    annihilation_op, anticommutator, commutator, creation_op, displacement_op,
    displacement_op_laguerre, number_op, tensor, FockDim, QuantumOperator,
};
use fockforge::{CMatrix, C64};
use proptest::prelude::*;

fn dim(n: usize) -> FockDim {
    FockDim::new(n).unwrap()
}

fn diag(op: &QuantumOperator) -> Vec<f64> {
    op.matrix().diagonal().iter().map(|z| z.re).collect()
}

#[test]
fn truncated_ladder_algebra() {
    let d = dim(4);
    let b = annihilation_op(d);
    let bd = creation_op(d);
    let close = |got: Vec<f64>, want: [f64; 4]| {
        assert!(
            got.iter().zip(want).all(|(g, w)| (g - w).abs() < 1e-12),
            "{got:?}"
        );
    };
    close(diag(&commutator(&b, &bd).unwrap()), [1.0, 1.0, 1.0, -3.0]);
    close(
        diag(&anticommutator(&b, &bd).unwrap()),
        [1.0, 3.0, 5.0, 3.0],
    );
    let n = number_op(dim(7));
    assert_eq!(diag(&n), (0..7).map(f64::from).collect::<Vec<_>>());
}

fn small_matrix(vals: &[f64], side: usize) -> CMatrix {
    CMatrix::from_fn(side, side, |i, j| {
        let k = 2 * (i * side + j);
        C64::new(vals[k % vals.len()], vals[(k + 1) % vals.len()])
    })
}

/// Levels on which an `n`-level truncation reproduces `D(α)` to double
/// precision.
fn trusted_levels(alpha: f64, n: usize) -> usize {
    (0..n)
        .take_while(|&k| {
            let reach = (k as f64).sqrt() + alpha;
            reach * reach + 8.0 * reach + 10.0 < n as f64
        })
        .count()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn displacement_routes_agree(r in 0.0f64..3.0, th in 0.0f64..std::f64::consts::TAU, n in 40usize..90) {
        let alpha = C64::from_polar(r, th);
        let d = dim(n);
        let ex = displacement_op(alpha, d);
        let lag = displacement_op_laguerre(alpha, d);
        let block = trusted_levels(r, n);
        let inv = displacement_op(-alpha, d);
        let prod = ex.compose(&inv).unwrap();
        for i in 0..block {
            for j in 0..block {
                prop_assert!((ex.matrix()[(i, j)] - lag.matrix()[(i, j)]).norm() < 1e-8);
                let want = if i == j { 1.0 } else { 0.0 };
                prop_assert!((prod.matrix()[(i, j)] - want).norm() < 1e-8);
            }
        }
    }

    #[test]
    fn kronecker_rules(vals in proptest::collection::vec(-1.0f64..1.0, 8..40)) {
        let (da, db) = (dim(2), dim(3));
        let a = QuantumOperator::new(small_matrix(&vals, 2), vec![da]).unwrap();
        let b = QuantumOperator::new(small_matrix(&vals[3..], 3), vec![db]).unwrap();
        let ab = tensor(&a, &b).unwrap();
        prop_assert!((ab.trace() - a.trace() * b.trace()).norm() < 1e-12);

        let c = QuantumOperator::new(small_matrix(&vals[1..], 2), vec![da]).unwrap();
        let e = QuantumOperator::new(small_matrix(&vals[2..], 3), vec![db]).unwrap();
        let lhs = ab.compose(&tensor(&c, &e).unwrap()).unwrap();
        let rhs = tensor(&a.compose(&c).unwrap(), &b.compose(&e).unwrap()).unwrap();
        prop_assert!((lhs.matrix() - rhs.matrix()).camax() < 1e-12);
    }
}
