use hostbridge::session::{self, call, protect_depth};
use hostbridge::{bench, session::square_minus_4_callable};
use hostbridge_core::{ProtectGuard, ValueHandle};
use proptest::prelude::*;

fn brute_convolution(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = (a.len() + b.len()).saturating_sub(1);
    (0..n)
        .map(|k| {
            let mut s = 0.0;
            for (i, ai) in a.iter().enumerate() {
                if k >= i && k - i < b.len() {
                    s += ai * b[k - i];
                }
            }
            s
        })
        .collect()
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let flo = f(lo);
    while (hi - lo).abs() >= tol {
        let mid = (lo + hi) / 2.0;
        if (f(mid) > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo + hi) / 2.0
}

fn convolve(a: Vec<f64>, b: Vec<f64>) -> Result<Vec<f64>, String> {
    mini_host::run(move || {
        session::register_builtins();
        let mut pc = ProtectGuard::new();
        let a = ValueHandle::new(a.as_slice(), &mut pc);
        let b = ValueHandle::new(b.as_slice(), &mut pc);
        call("convolve2", &[a, b]).map(|v| v.slice_double().unwrap().to_vec())
    })
}

fn zero_of(guesses: [f64; 2], tol: f64) -> Result<f64, String> {
    mini_host::run(move || {
        session::register_builtins();
        let mut pc = ProtectGuard::new();
        let f = square_minus_4_callable(&mut pc);
        let g = ValueHandle::new(&guesses[..], &mut pc);
        let t = ValueHandle::new(tol, &mut pc);
        let rho = ValueHandle::new_environment(ValueHandle::global_env(), &mut pc);
        call("zero", &[f, g, t, rho]).map(|v| v.as_f64().unwrap())
    })
}

#[test]
fn convolve2_small_cases() {
    assert_eq!(convolve(vec![1.0, 2.0, 3.0], vec![1.0, 1.0]), Ok(vec![1.0, 3.0, 5.0, 3.0]));
    assert_eq!(convolve(vec![5.0], vec![1.0]), Ok(vec![5.0]));
    assert_eq!(convolve(vec![], vec![]), Ok(vec![]));
}

#[test]
fn convolve2_coerces_integers_and_leaves_inputs_alone() {
    let (from_ints, from_reals, a_after) = mini_host::run(|| {
        session::register_builtins();
        let mut pc = ProtectGuard::new();
        let ai = ValueHandle::new(&[1, 2, 3][..], &mut pc);
        let bi = ValueHandle::new(&[4, 5][..], &mut pc);
        let ar = ValueHandle::new(&[1.0, 2.0, 3.0][..], &mut pc);
        let br = ValueHandle::new(&[4.0, 5.0][..], &mut pc);
        let x = call("convolve2", &[ai, bi]).unwrap().slice_double().unwrap().to_vec();
        let y = call("convolve2", &[ar, br]).unwrap().slice_double().unwrap().to_vec();
        (x, y, ar.slice_double().unwrap().to_vec())
    });
    assert_eq!(from_ints, from_reals);
    assert_eq!(a_after, vec![1.0, 2.0, 3.0]);
}

#[test]
fn convolve2_rejects_non_numeric_input() {
    let (err, depth_ok) = mini_host::run(|| {
        session::register_builtins();
        let base = protect_depth();
        let mut pc = ProtectGuard::new();
        let s = ValueHandle::new("text", &mut pc);
        let err = call("convolve2", &[s, s]).unwrap_err();
        drop(pc);
        (err, protect_depth() == base)
    });
    assert!(err.contains("NotCoercible"), "{err}");
    assert!(depth_ok);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn convolve2_matches_brute_force(
        a in prop::collection::vec(-1e3f64..1e3, 0..20),
        b in prop::collection::vec(-1e3f64..1e3, 0..20),
    ) {
        let expected = brute_convolution(&a, &b);
        let got = convolve(a, b).unwrap();
        prop_assert_eq!(got.len(), expected.len());
        for (g, e) in got.iter().zip(&expected) {
            prop_assert!((g - e).abs() <= 1e-12 * e.abs().max(1.0), "{} vs {}", g, e);
        }
    }
}

#[test]
fn zero_finds_the_root() {
    let expected = bisect(|x| x * x - 4.0, 0.0, 10.0, 1e-6);
    let got = zero_of([0.0, 10.0], 1e-6).unwrap();
    assert!((got - 2.0).abs() < 1e-6);
    assert!((got - expected).abs() < 1e-6);
    assert_eq!(zero_of([2.0, 10.0], 1e-6), Ok(2.0));
    assert_eq!(zero_of([-3.0, 2.0], 1e-6), Ok(2.0));
}

#[test]
fn zero_error_paths() {
    let same = zero_of([3.0, 10.0], 1e-6).unwrap_err();
    assert!(same.contains("x[0] and x[1] have the same sign"), "{same}");
    let tol = zero_of([0.0, 10.0], 0.0).unwrap_err();
    assert!(tol.contains("non-positive tol value"), "{tol}");
    assert!(tol.contains("examples.rs:"), "{tol}");
    assert!(zero_of([0.0, 10.0], 1e-6).is_ok());
}

#[test]
fn myrnorm_uses_the_host_stream() {
    let (got, direct, empty) = mini_host::run(|| {
        session::register_builtins();
        let mut pc = ProtectGuard::new();
        let args = [
            ValueHandle::new(5, &mut pc),
            ValueHandle::new(0.0, &mut pc),
            ValueHandle::new(1.0, &mut pc),
        ];
        session::set_seed(7);
        let got = call("myrnorm", &args).unwrap().slice_double().unwrap().to_vec();
        session::set_seed(7);
        let direct = session::host_norm_draws(5, 0.0, 1.0);
        let zero = ValueHandle::new(0, &mut pc);
        let empty = call("myrnorm", &[zero, args[1], args[2]]).unwrap().len();
        (got, direct, empty)
    });
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&got), bits(&direct));
    assert_eq!(empty, 0);
}

#[test]
fn myrnorm_rejects_bad_counts() {
    let errs = mini_host::run(|| {
        session::register_builtins();
        let mut pc = ProtectGuard::new();
        let mean = ValueHandle::new(0.0, &mut pc);
        let x = ValueHandle::new("x", &mut pc);
        let neg = ValueHandle::new(-1, &mut pc);
        let e1 = call("myrnorm", &[x, mean, mean]).unwrap_err();
        let e2 = call("myrnorm", &[neg, mean, mean]).unwrap_err();
        let ok = call("myrnorm", &[ValueHandle::new(2, &mut pc), mean, mean]).is_ok();
        (e1, e2, ok)
    });
    assert!(errs.0.starts_with("panicked at "), "{}", errs.0);
    assert!(errs.1.contains("nonnegative"), "{}", errs.1);
    assert!(errs.2);
}

#[test]
fn euclid_norm_variants_agree() {
    let (bridged, native, symbol, empty) = mini_host::run(|| {
        session::register_builtins();
        let mut pc = ProtectGuard::new();
        let x = ValueHandle::new(&[3.0, 4.0][..], &mut pc);
        let e = ValueHandle::new(&[][..] as &[f64], &mut pc);
        (
            call("euclid_norm", &[x]).unwrap().as_f64().unwrap(),
            call(session::NATIVE_NORM, &[x]).unwrap().as_f64().unwrap(),
            session::call_symbol("euclid_norm", &[x]).unwrap().as_f64().unwrap(),
            call("euclid_norm", &[e]).unwrap().as_f64().unwrap(),
        )
    });
    assert_eq!((bridged, native, symbol, empty), (5.0, 5.0, 5.0, 0.0));
}

#[test]
fn small_benchmark_reports_every_variant() {
    let report = bench::run_benchmark(2_000, 10);
    assert_eq!(report.variants.len(), 3);
    assert!(report.iterations >= 2_000);
    assert!(report.identical_outputs());
    for v in &report.variants {
        assert!(v.min_ns >= 0.0 && v.min_ns <= v.median_ns.max(v.mean_ns));
    }
    assert_eq!(report.to_csv().lines().count(), 3);
    assert!(report.to_text().contains("bridged_uncached"));
}
