//! Call-overhead benchmark for a length-`L` Euclidean norm.
//!
//! Variants, all over the same input vector:
//! * `native`: host-native C function, registered and called through a
//!   cached registry entry;
//! * `bridged`: the exported guest function [`euclid_norm`], called the
//!   same way;
//! * `bridged_uncached`: the same guest function, resolved through the
//!   dynamic linker on every call.

use std::ffi::{c_char, CString};
use std::fmt::Write as _;
use std::ptr;
use std::time::Instant;

use hostbridge_core::prelude::*;
use hostbridge_core::raw::{self, RawCellRef};

use crate::session;

export! {
    /// Square root of the sum of squares of a double vector.
    fn euclid_norm(pc: &mut ProtectGuard, x: ValueHandle) -> ValueHandle {
        let ss = x.slice_double().unwrap().iter().fold(0.0, |s, z| s + (*z) * (*z));
        ValueHandle::new(ss.sqrt(), pc)
    }
}

pub const VARIANTS: [&str; 3] = ["native", "bridged", "bridged_uncached"];

const BATCH: usize = 100;
const WARMUP_CALLS: usize = 2_000;

#[derive(Debug, Clone, PartialEq)]
pub struct VariantStats {
    pub label: String,
    pub min_ns: f64,
    pub mean_ns: f64,
    pub median_ns: f64,
    /// Bit pattern of the variant's result.
    pub output_bits: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    /// Calls timed per variant, before dropping the first tenth.
    pub iterations: usize,
    pub vector_length: usize,
    pub variants: Vec<VariantStats>,
}

impl BenchReport {
    pub fn variant(&self, label: &str) -> Option<&VariantStats> {
        self.variants.iter().find(|v| v.label == label)
    }

    /// Mean of `label` divided by the mean of `native`.
    pub fn mean_ratio(&self, label: &str) -> Option<f64> {
        Some(self.variant(label)?.mean_ns / self.variant("native")?.mean_ns)
    }

    pub fn identical_outputs(&self) -> bool {
        self.variants.windows(2).all(|w| w[0].output_bits == w[1].output_bits)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "euclidean norm, length {}, {} calls per variant (nanoseconds per call)",
            self.vector_length, self.iterations
        );
        let _ = writeln!(s, "{:<18} {:>10} {:>10} {:>10}", "variant", "min", "mean", "median");
        for v in &self.variants {
            let _ = writeln!(
                s,
                "{:<18} {:>10.1} {:>10.1} {:>10.1}",
                v.label, v.min_ns, v.mean_ns, v.median_ns
            );
        }
        s
    }

    /// One `variant,min,mean,median` line per variant.
    pub fn to_csv(&self) -> String {
        self.variants
            .iter()
            .map(|v| format!("{},{:.3},{:.3},{:.3}\n", v.label, v.min_ns, v.mean_ns, v.median_ns))
            .collect()
    }
}

#[derive(Clone, Copy)]
enum Target {
    Entry(raw::MhEntry),
    Symbol(*const c_char),
}

#[inline(never)]
fn run_batch(target: Target, args: &[RawCellRef; 1], n: usize) -> u64 {
    let mut out = ptr::null_mut();
    let mut err: *const c_char = ptr::null();
    for _ in 0..n {
        out = unsafe {
            match target {
                Target::Entry(e) => raw::mh_call_entry(e, args.as_ptr(), 1, &mut err),
                Target::Symbol(s) => raw::mh_call_symbol(s, args.as_ptr(), 1, &mut err),
            }
        };
        if unsafe { *err } != 0 {
            let msg = unsafe { std::ffi::CStr::from_ptr(err) }.to_string_lossy();
            panic!("benchmark call failed: {msg}");
        }
    }
    // The result is unprotected; read it before anything else allocates.
    unsafe { raw::mh_as_real(out) }.to_bits()
}

fn summarize(label: &str, mut per_call: Vec<f64>, output_bits: u64) -> VariantStats {
    let skip = per_call.len() / 10;
    let kept: &mut [f64] = &mut per_call[skip..];
    let mean = kept.iter().sum::<f64>() / kept.len() as f64;
    kept.sort_by(f64::total_cmp);
    let n = kept.len();
    let median = if n % 2 == 1 {
        kept[n / 2]
    } else {
        0.5 * (kept[n / 2 - 1] + kept[n / 2])
    };
    VariantStats {
        label: label.to_string(),
        min_ns: kept[0],
        mean_ns: mean,
        median_ns: median,
        output_bits,
    }
}

/// Times all variants on one random vector of length `vector_length`.
///
/// Calls run in batches of 100, with the variants taking turns batch by
/// batch; statistics are over per-call batch averages, excluding the first
/// tenth of the batches. Runs on the host thread.
pub fn run_benchmark(iterations: usize, vector_length: usize) -> BenchReport {
    mini_host::run(move || run_on_host(iterations, vector_length))
}

fn run_on_host(iterations: usize, vector_length: usize) -> BenchReport {
    session::register_builtins();
    let batches = iterations.div_ceil(BATCH).max(10);
    let mut pc = ProtectGuard::new();
    session::set_seed(20_240_101);
    let draws = session::host_norm_draws(vector_length, 0.0, 1.0);
    let x = ValueHandle::new(draws.as_slice(), &mut pc);
    let args = [x.into_raw()];

    let lookup = |name: &str| {
        let c = CString::new(name).unwrap();
        let e = unsafe { raw::mh_lookup(c.as_ptr()) };
        assert!(!e.is_null(), "{name} is not registered");
        e
    };
    let symbol = CString::new("euclid_norm").unwrap();
    let targets = [
        Target::Entry(lookup(session::NATIVE_NORM)),
        Target::Entry(lookup("euclid_norm")),
        Target::Symbol(symbol.as_ptr()),
    ];

    for t in targets {
        run_batch(t, &args, WARMUP_CALLS);
    }
    let mut times = vec![Vec::with_capacity(batches); targets.len()];
    let mut outputs = [0u64; 3];
    for _ in 0..batches {
        for (k, t) in targets.iter().enumerate() {
            let start = Instant::now();
            outputs[k] = run_batch(*t, &args, BATCH);
            let elapsed = start.elapsed().as_nanos() as f64;
            times[k].push(elapsed / BATCH as f64);
        }
    }
    let variants = VARIANTS
        .iter()
        .zip(times)
        .zip(outputs)
        .map(|((label, t), out)| summarize(label, t, out))
        .collect();
    BenchReport {
        iterations: batches * BATCH,
        vector_length,
        variants,
    }
}
