use ski_demo::{gram_curve, kernel_slice, posterior, CURVE_M};

#[test]
fn slice_error_shrinks_with_grid() {
    let worst = |m| {
        let v = kernel_slice(m, 0.5, 201).unwrap();
        let (exact, approx) = (&v[201..402], &v[402..]);
        exact.iter().zip(approx).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    };
    assert!(worst(32) < worst(8) / 20.0);
}

#[test]
fn gram_curve_is_dominated() {
    let k = CURVE_M.len();
    let v = gram_curve(60, 0.5, 3).unwrap();
    assert_eq!(v.len(), 3 * k);
    for i in 0..k {
        assert!(v[k + i] <= v[2 * k + i], "m = {}", v[i]);
    }
}

#[test]
fn fine_grid_posterior_matches_exact() {
    let (n, t) = (40, 50);
    let v = posterior(n, 64, 0.5, 7, t).unwrap();
    assert_eq!(v.len(), 5 * t + 2 * n);
    for i in 0..t {
        assert!((v[t + i] - v[2 * t + i]).abs() < 1e-3);
        assert!((v[3 * t + i] - v[4 * t + i]).abs() < 1e-3);
    }
}

#[test]
fn bad_arguments_are_errors() {
    assert!(kernel_slice(0, 0.5, 10).is_err());
    assert!(posterior(10, 16, -1.0, 1, 10).is_err());
}
