// Example guest functions: random normals from the host generator,
// convolution of two numeric vectors, and bisection root finding over a
// host-side function.

use hostbridge_core::prelude::*;
use hostbridge_core::raw;

export! {
    /// `n` normal deviates with the given mean and standard deviation,
    /// drawn from the host generator.
    fn myrnorm(pc: &mut ProtectGuard, n: ValueHandle, mean: ValueHandle, sd: ValueHandle) -> ValueHandle {
        let (mean, sd) = (mean.as_f64().unwrap(), sd.as_f64().unwrap());
        let length = n.as_i32().unwrap();
        if ValueHandle::is_na_integer(length) || length < 0 {
            panic!("n must be a nonnegative integer");
        }
        let (vec, slice) = ValueHandle::new_vector_double(length as usize, pc);
        unsafe {
            raw::mh_rng_get();
            for x in slice.iter_mut() {
                *x = raw::mh_rng_norm(mean, sd);
            }
            raw::mh_rng_put();
        }
        vec
    }
}

export! {
    /// Full discrete convolution of `a` and `b`.
    fn convolve2(pc: &mut ProtectGuard, a: ValueHandle, b: ValueHandle) -> ValueHandle {
        let (a, xa) = a.coerce_double(pc).unwrap();
        let (b, xb) = b.coerce_double(pc).unwrap();
        let (ab, xab) = ValueHandle::new_vector_double((a.len() + b.len()).saturating_sub(1), pc);
        for xabi in xab.iter_mut() {
            *xabi = 0.0
        }
        for (i, xai) in xa.iter().enumerate() {
            for (j, xbj) in xb.iter().enumerate() {
                xab[i + j] += xai * xbj;
            }
        }
        ab
    }
}

export! {
    /// Root of `f` between `guesses[0]` and `guesses[1]` by bisection.
    /// `f` is evaluated in `rho` with `x` bound to the current point.
    fn zero(pc: &mut ProtectGuard, f: ValueHandle, guesses: ValueHandle, stol: ValueHandle, rho: ValueHandle) -> ValueHandle {
        let slice = guesses.slice_double().unwrap();
        assert!(slice.len() >= 2, "guesses must hold two values");
        let (mut x0, mut x1, tol) = (slice[0], slice[1], stol.as_f64().unwrap());
        if tol <= 0.0 {
            panic!("non-positive tol value");
        }
        let symbol = ValueHandle::new_symbol("x", pc);
        let feval = |x: f64| {
            let mut pc = ProtectGuard::new();
            symbol.assign(ValueHandle::new(x, &mut pc), rho);
            f.eval(rho, &mut pc).unwrap().as_f64().unwrap()
        };
        let mut f0 = feval(x0);
        if f0 == 0.0 {
            return ValueHandle::new(x0, pc);
        }
        let f1 = feval(x1);
        if f1 == 0.0 {
            return ValueHandle::new(x1, pc);
        }
        if f0 * f1 > 0.0 {
            panic!("x[0] and x[1] have the same sign");
        }
        loop {
            let xc = 0.5 * (x0 + x1);
            if (x0 - x1).abs() < tol {
                return ValueHandle::new(xc, pc);
            }
            let fc = feval(xc);
            if fc == 0.0 {
                return ValueHandle::new(xc, pc);
            }
            if f0 * fc > 0.0 {
                x0 = xc;
                f0 = fc;
            } else {
                x1 = xc;
            }
        }
    }
}
