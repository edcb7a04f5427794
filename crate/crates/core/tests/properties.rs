mod common;

use common::{call, depth, register, run};
use hostbridge_core::prelude::*;
use hostbridge_core::raw::{self, RawCellRef};
use proptest::prelude::*;

/// One cell of every kind, protected by the caller.
unsafe fn adversarial_cells() -> Vec<RawCellRef> {
    let mut cells = vec![
        raw::mh_null(),
        raw::mh_scalar_real(1.5),
        common::int_vector(&[1, 2, 3]),
        raw::mh_scalar_logical(1),
        raw::mh_alloc_vector(raw::MH_STRING, 2),
        raw::mh_install(c"adv_symbol".as_ptr()),
        raw::mh_alloc_vector(raw::MH_LIST, 2),
        raw::mh_global_env(),
    ];
    let matrix = raw::mh_alloc_vector(raw::MH_REAL, 4);
    raw::mh_set_dim(matrix, 2, 2);
    cells.push(matrix);
    cells.push(raw::mh_alloc_vector(raw::MH_REAL, 0));
    for c in &cells {
        raw::mh_protect(*c);
    }
    cells
}

// Exercises the safe surface on an arbitrary cell; `op` picks the operation.
export! {
    fn prop_apply(pc: &mut ProtectGuard, op: ValueHandle, x: ValueHandle) -> ValueHandle {
        let op = op.as_i32().unwrap();
        let env = ValueHandle::global_env();
        let out: f64 = match op {
            0 => x.slice_double().map(|s| s.len() as f64).unwrap_or(-1.0),
            1 => x.slice_integer().map(|s| s.len() as f64).unwrap_or(-1.0),
            2 => x.slice_logical().map(|s| s.len() as f64).unwrap_or(-1.0),
            3 => x.coerce_double(pc).map(|(_, s)| s.len() as f64).unwrap_or(-1.0),
            4 => x.coerce_integer(pc).map(|(_, s)| s.len() as f64).unwrap_or(-1.0),
            5 => x.as_f64().unwrap_or(-1.0),
            6 => x.as_i32().map(f64::from).unwrap_or(-1.0),
            7 => x.nrow().map(|n| n as f64).unwrap_or(-1.0),
            8 => x.is_square_matrix() as i32 as f64,
            9 => x.get_string(0).map(|s| s.len() as f64).unwrap_or(-1.0),
            10 => x.get_list_element(0).map(|_| 1.0).unwrap_or(-1.0),
            11 => x.eval(env, pc).map(|_| 1.0).unwrap_or(-1.0),
            12 => x.symbol_name().map(|s| s.len() as f64).unwrap_or(-1.0),
            13 => x.as_bool().map(|b| b.is_some() as i32 as f64).unwrap_or(-1.0),
            14 => x.names().map(|_| 1.0).unwrap_or(0.0),
            15 => x.lookup(env).map(|_| 1.0).unwrap_or(0.0),
            16 => x.len() as f64,
            _ => x.get_list_element_by_name("a").map(|_| 1.0).unwrap_or(-1.0),
        };
        ValueHandle::new(out, pc)
    }
}

const OPS: i32 = 18;

#[test]
fn no_safe_operation_jumps() {
    let outcomes = run(|| {
        register("prop_apply", prop_apply as raw::MhFnPtr, 2);
        let base = depth();
        let cells = unsafe { adversarial_cells() };
        let mut outcomes = Vec::new();
        for op in 0..OPS {
            let opcell = unsafe { raw::mh_protect(raw::mh_scalar_integer(op)) };
            for (k, &c) in cells.iter().enumerate() {
                let res = call("prop_apply", &[opcell, c]);
                let leak = unsafe { raw::mh_last_call_leak() };
                // A converted panic is fine; a raw host error would mean a jump.
                let clean = match &res {
                    Ok(_) => true,
                    Err(msg) => msg.starts_with("panicked at "),
                };
                outcomes.push((op, k, clean, leak));
            }
            unsafe { raw::mh_unprotect(1) };
        }
        unsafe { raw::mh_unprotect(cells.len() as i32) };
        assert_eq!(depth(), base);
        outcomes
    });
    for (op, k, ok, leak) in outcomes {
        assert!(ok, "op {op} on cell {k} raised a host error");
        assert_eq!(leak, 0, "op {op} on cell {k} leaked protection");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn guard_balance(sizes in prop::collection::vec((0u8..6, 0usize..8), 0..24)) {
        let (base, inside, after, expected) = run(move || {
            let base = depth();
            let mut expected = 0;
            let inside = {
                let mut pc = ProtectGuard::new();
                for (what, n) in &sizes {
                    match what {
                        0 => { ValueHandle::new_vector_double(*n, &mut pc); }
                        1 => { ValueHandle::new_vector_integer(*n, &mut pc); }
                        2 => { ValueHandle::new_list(*n, &mut pc); }
                        3 => {
                            let ints = ValueHandle::new_vector_integer(*n, &mut pc).0;
                            expected += 1;
                            ints.coerce_double(&mut pc).unwrap();
                        }
                        4 => {
                            // Identity coercion protects nothing new.
                            let real = ValueHandle::new_vector_double(*n, &mut pc).0;
                            real.coerce_double(&mut pc).unwrap();
                        }
                        _ => { ValueHandle::new_matrix_double(*n, 2, &mut pc); }
                    }
                    expected += 1;
                }
                depth() - base
            };
            (base, inside, depth(), expected)
        });
        prop_assert_eq!(inside, expected);
        prop_assert_eq!(after, base);
    }

    #[test]
    fn view_fidelity(values in prop::collection::vec(any::<f64>(), 0..32), ints in prop::collection::vec(any::<i32>(), 0..32)) {
        let (back, raw_back, iback) = run(move || {
            let mut pc = ProtectGuard::new();
            let (v, view) = ValueHandle::new_vector_double(values.len(), &mut pc);
            view.copy_from_slice(&values);
            let raw_back = common::reals(v.into_raw());
            let host = unsafe { raw::mh_raw_view(v.into_raw(), raw::MH_REAL) as *mut f64 };
            for i in 0..values.len() {
                unsafe { *host.add(i) = -values[i] };
            }
            let back = v.slice_double().unwrap().to_vec();
            let (iv, iview) = ValueHandle::new_vector_integer(ints.len(), &mut pc);
            iview.copy_from_slice(&ints);
            let iback = unsafe {
                std::slice::from_raw_parts(raw::mh_raw_view(iv.into_raw(), raw::MH_INTEGER) as *const i32, ints.len()).to_vec()
            };
            (back, raw_back, (iback, ints))
        });
        let _ = &raw_back;
        for (b, r) in back.iter().zip(&raw_back) {
            prop_assert_eq!(b.to_bits(), (-*r).to_bits());
        }
        prop_assert_eq!(iback.0, iback.1);
    }

    #[test]
    fn coerce_identity(values in prop::collection::vec(-1e6f64..1e6, 0..16)) {
        let same = run(move || {
            let mut pc = ProtectGuard::new();
            let v = ValueHandle::new(values.as_slice(), &mut pc);
            let (c, _) = v.coerce_double(&mut pc).unwrap();
            c.into_raw() == v.into_raw()
        });
        prop_assert!(same);
    }

    #[test]
    fn integer_to_real_coercion_preserves_values(ints in prop::collection::vec(any::<i32>(), 0..16)) {
        let expected: Vec<u64> = ints
            .iter()
            .map(|&i| if i == i32::MIN { raw::MH_NA_REAL_BITS } else { (i as f64).to_bits() })
            .collect();
        let got = run(move || {
            let mut pc = ProtectGuard::new();
            let v = ValueHandle::new(ints.as_slice(), &mut pc);
            v.coerce_double(&mut pc).unwrap().1.iter().map(|x| x.to_bits()).collect::<Vec<_>>()
        });
        prop_assert_eq!(got, expected);
    }

    #[test]
    fn handle_round_trip_is_identity(addr in any::<usize>()) {
        let cell = addr as RawCellRef;
        prop_assert_eq!(ValueHandle::from_raw(cell).into_raw(), cell);
        let via: RawCellRef = ValueHandle::from(cell).into();
        prop_assert_eq!(via as usize, addr);
    }

    #[test]
    fn panics_are_controlled(tol in -10.0f64..10.0) {
        let (res, base, after) = run(move || {
            register("prop_tol", prop_tol as raw::MhFnPtr, 1);
            let base = depth();
            let t = unsafe { raw::mh_protect(raw::mh_scalar_real(tol)) };
            let res = call("prop_tol", &[t]).map(|c| unsafe { raw::mh_as_real(c) });
            unsafe { raw::mh_unprotect(1) };
            (res, base, depth())
        });
        prop_assert_eq!(after, base);
        if tol <= 0.0 {
            prop_assert!(res.unwrap_err().contains("non-positive tol value"));
        } else {
            prop_assert_eq!(res, Ok(tol));
        }
    }
}

export! {
    fn prop_tol(pc: &mut ProtectGuard, tol: ValueHandle) -> ValueHandle {
        let tol = tol.as_f64().unwrap();
        if tol <= 0.0 {
            panic!("non-positive tol value");
        }
        ValueHandle::new(tol, pc)
    }
}
