mod common;

use common::{depth, run};
use hostbridge_core::na::{NA_INTEGER, NA_REAL};
use hostbridge_core::raw::{self, RawCellRef};
use hostbridge_core::{
    check_user_interrupt, print_line, random_bytes, random_seed, ApiError, CellKind,
    ProtectGuard, ValueHandle,
};

#[test]
fn guard_releases_everything_it_protected() {
    let (inside, after, base) = run(|| {
        let base = depth();
        let inside = {
            let mut pc = ProtectGuard::new();
            ValueHandle::new_vector_double(3, &mut pc);
            ValueHandle::new_scalar_integer(1, &mut pc);
            ValueHandle::new_string_array(&["a"], &mut pc);
            assert_eq!(pc.count(), 3);
            depth()
        };
        (inside, depth(), base)
    });
    assert_eq!(inside, base + 3);
    assert_eq!(after, base);
}

#[test]
fn nested_guards_release_lifo() {
    run(|| {
        let base = depth();
        let mut outer = ProtectGuard::new();
        let kept = ValueHandle::new_scalar_double(1.0, &mut outer);
        {
            let mut inner = ProtectGuard::new();
            ValueHandle::new_scalar_double(2.0, &mut inner);
            ValueHandle::new_scalar_double(3.0, &mut inner);
            assert_eq!(depth(), base + 3);
        }
        assert_eq!(depth(), base + 1);
        assert_eq!(kept.as_f64(), Ok(1.0));
        drop(outer);
        assert_eq!(depth(), base);
        let empty = ProtectGuard::default();
        drop(empty);
        assert_eq!(depth(), base);
    });
}

#[test]
fn vector_and_matrix_constructors() {
    run(|| {
        let mut pc = ProtectGuard::new();
        let (v, view) = ValueHandle::new_vector_double(0, &mut pc);
        assert!(view.is_empty());
        assert_eq!(v.len(), 0);
        assert!(v.is_double());

        let (m, view) = ValueHandle::new_matrix_integer(4, 2, &mut pc);
        assert_eq!(view, &[0; 8][..]);
        assert_eq!(m.nrow(), Ok(4));
        assert_eq!(m.ncol(), Ok(2));
        assert!(!m.is_square_matrix());
        assert!(m.is_matrix());

        let (sq, view) = ValueHandle::new_matrix_double(3, 3, &mut pc);
        view[1] = 5.0;
        assert!(sq.is_square_matrix());
        assert!(sq.is_double_or_integer());
        // Column-major: element (1, 0).
        assert_eq!(sq.slice_double().unwrap()[1], 5.0);

        let (plain, _) = ValueHandle::new_vector_double(4, &mut pc);
        assert!(!plain.is_square_matrix());
        assert_eq!(plain.nrow(), Err(ApiError::NotAMatrix));
    });
}

#[test]
fn scalars_round_trip() {
    run(|| {
        let mut pc = ProtectGuard::new();
        assert_eq!(ValueHandle::new_scalar_double(2.5, &mut pc).as_f64(), Ok(2.5));
        assert_eq!(ValueHandle::new_scalar_integer(-4, &mut pc).as_i32(), Ok(-4));
        assert_eq!(ValueHandle::new_scalar_logical(true, &mut pc).as_bool(), Ok(Some(true)));
        assert_eq!(ValueHandle::new(7i32, &mut pc).as_f64(), Ok(7.0));
        assert_eq!(ValueHandle::new(2.9f64, &mut pc).as_i32(), Ok(2));
        let s = ValueHandle::new(["cost", "pairs"], &mut pc);
        assert_eq!(s.kind(), CellKind::String);
        assert_eq!(s.len(), 2);
        assert_eq!(s.get_string(1).as_deref(), Ok("pairs"));
        let sym = ValueHandle::new_symbol("xy", &mut pc);
        assert!(matches!(sym.as_f64(), Err(ApiError::NotCoercible { .. })));
        assert_eq!(sym.symbol_name().as_deref(), Ok("xy"));
    });
}

#[test]
fn coerce_double_identity_copy_and_error() {
    run(|| {
        let mut pc = ProtectGuard::new();
        let (real, _) = ValueHandle::new_vector_double(2, &mut pc);
        let (same, _) = real.coerce_double(&mut pc).unwrap();
        assert_eq!(same.into_raw(), real.into_raw());

        let ints = ValueHandle::new(&[1, 2][..], &mut pc);
        let before = pc.count();
        let (copy, view) = ints.coerce_double(&mut pc).unwrap();
        assert_ne!(copy.into_raw(), ints.into_raw());
        assert_eq!(view, &[1.0, 2.0][..]);
        assert_eq!(pc.count(), before + 1);
        assert_eq!(ints.slice_integer().unwrap(), &[1, 2][..]);

        let (lgl, view) = ValueHandle::new_vector_logical(2, &mut pc);
        view[0] = 1;
        view[1] = NA_INTEGER;
        let (_, as_real) = lgl.coerce_double(&mut pc).unwrap();
        assert_eq!(as_real[0], 1.0);
        assert!(ValueHandle::is_na_real(as_real[1]));

        let (_, as_int) = real.coerce_integer(&mut pc).unwrap();
        assert_eq!(as_int, &[0, 0][..]);

        let sym = ValueHandle::new_symbol("s", &mut pc);
        assert!(matches!(
            sym.coerce_double(&mut pc),
            Err(ApiError::NotCoercible { found: CellKind::Symbol, .. })
        ));
    });
}

#[test]
fn views_are_kind_checked_and_shared_with_the_host() {
    run(|| {
        let mut pc = ProtectGuard::new();
        let (v, view) = ValueHandle::new_vector_double(3, &mut pc);
        view[2] = 9.5;
        assert_eq!(common::reals(v.into_raw())[2], 9.5);
        unsafe { *(raw::mh_raw_view(v.into_raw(), raw::MH_REAL) as *mut f64) = -1.0 };
        assert_eq!(v.slice_double().unwrap()[0], -1.0);

        let ints = ValueHandle::new(&[1, 2][..], &mut pc);
        assert_eq!(
            ints.slice_double().unwrap_err(),
            ApiError::KindMismatch { expected: CellKind::Real, found: CellKind::Integer }
        );
        assert!(ints.slice_logical().is_err());
        assert!(ValueHandle::null().slice_integer().is_err());
    });
}

#[test]
fn na_predicates() {
    assert!(ValueHandle::is_na_integer(i32::MIN));
    assert!(!ValueHandle::is_na_integer(0));
    assert!(ValueHandle::is_na_real(NA_REAL));
    assert!(!ValueHandle::is_na_real(f64::NAN));
    assert!(!ValueHandle::is_na_real(0.0 / 0.0));
    run(|| {
        let mut pc = ProtectGuard::new();
        let ints = ValueHandle::new(&[NA_INTEGER, 3][..], &mut pc);
        let (_, reals) = ints.coerce_double(&mut pc).unwrap();
        assert!(ValueHandle::is_na_real(reals[0]));
        assert_eq!(reals[1], 3.0);
        let na = ValueHandle::new(NA_REAL, &mut pc);
        assert_eq!(na.as_i32(), Ok(NA_INTEGER));
    });
}

#[test]
fn lists_and_names() {
    run(|| {
        let mut pc = ProtectGuard::new();
        let list = ValueHandle::new_list(2, &mut pc);
        list.names_gets(ValueHandle::new(["cost", "pairs"], &mut pc));
        list.set_list_element(0, ValueHandle::new(3.5, &mut pc));
        let (pairs, _) = ValueHandle::new_matrix_integer(2, 2, &mut pc);
        list.set_list_element(1, pairs);
        assert_eq!(list.get_list_element(0).unwrap().as_f64(), Ok(3.5));
        assert_eq!(list.get_list_element_by_name("pairs").unwrap().into_raw(), pairs.into_raw());
        assert_eq!(
            list.get_list_element_by_name("nope").unwrap_err(),
            ApiError::NoSuchName("nope".into())
        );
        assert_eq!(
            list.get_list_element(2).unwrap_err(),
            ApiError::OutOfRange { index: 2, length: 2 }
        );
        assert_eq!(list.names().unwrap().get_string(0).as_deref(), Ok("cost"));
        let empty = ValueHandle::new_list(0, &mut pc);
        assert_eq!(empty.len(), 0);
    });
}

extern "C" fn square_minus_4(x: RawCellRef) -> RawCellRef {
    unsafe {
        let v = raw::mh_as_real(x);
        raw::mh_scalar_real(v * v - 4.0)
    }
}

extern "C" fn always_fails(_x: RawCellRef) -> RawCellRef {
    unsafe { raw::mh_error(c"deliberate failure".as_ptr()) }
}

#[test]
fn assign_and_eval() {
    let (direct, via_form, failed, base, after) = run(|| {
        let base = depth();
        let out = {
            let mut pc = ProtectGuard::new();
            let rho = ValueHandle::new_environment(ValueHandle::global_env(), &mut pc);
            let x = ValueHandle::new_symbol("x", &mut pc);
            x.assign(ValueHandle::new(3.0, &mut pc), rho);
            assert_eq!(x.lookup(rho).unwrap().as_f64(), Ok(3.0));
            let f = unsafe {
                ValueHandle::new_callable(square_minus_4 as raw::MhFnPtr, &["x"], &mut pc)
            };
            let direct = f.eval(rho, &mut pc).unwrap().as_f64().unwrap();
            x.assign(ValueHandle::new(5.0, &mut pc), rho);
            let form = ValueHandle::new_call_form(f, &["x"], &mut pc);
            let via_form = form.eval(rho, &mut pc).unwrap().as_f64().unwrap();
            let bad = unsafe {
                ValueHandle::new_callable(always_fails as raw::MhFnPtr, &["x"], &mut pc)
            };
            let failed = bad.eval(rho, &mut pc).unwrap_err();
            assert!(matches!(
                ValueHandle::new(1.0, &mut pc).eval(rho, &mut pc),
                Err(ApiError::Eval(_))
            ));
            let unbound = ValueHandle::new_symbol("never_bound_anywhere", &mut pc);
            assert!(unbound.lookup(rho).is_none());
            (direct, via_form, failed)
        };
        (out.0, out.1, out.2, base, depth())
    });
    assert_eq!(direct, 5.0);
    assert_eq!(via_form, 21.0);
    assert_eq!(failed, ApiError::Eval("deliberate failure".into()));
    assert_eq!(after, base);
}

struct SetOnDrop<'a>(&'a mut bool);

impl Drop for SetOnDrop<'_> {
    fn drop(&mut self) {
        *self.0 = true;
    }
}

#[test]
fn print_line_reports_interrupts_without_unwinding() {
    let ((quiet, interrupted, cleanup_ran, pending_after), out) = mini_host::capture_console(|| {
        let quiet = print_line("hi");
        let mut cleanup_ran = false;
        let interrupted = {
            let _cleanup = SetOnDrop(&mut cleanup_ran);
            unsafe { raw::mh_set_interrupt(1) };
            print_line("never shown")
        };
        let pending_after = unsafe { raw::mh_interrupt_pending() };
        (quiet, interrupted, cleanup_ran, pending_after)
    });
    assert!(!quiet);
    assert!(interrupted);
    assert!(cleanup_ran);
    assert_eq!(pending_after, 0);
    assert_eq!(out, "hi\n");
}

#[test]
fn println_macro_formats() {
    let (flag, out) = mini_host::capture_console(|| hostbridge_core::hb_println!("{} + {} = {}", 1, 2, 3));
    assert!(!flag);
    assert_eq!(out, "1 + 2 = 3\n");
}

#[test]
fn check_user_interrupt_polls_and_clears() {
    let seen = run(|| {
        let before = check_user_interrupt();
        unsafe { raw::mh_set_interrupt(1) };
        let first = check_user_interrupt();
        let second = check_user_interrupt();
        (before, first, second)
    });
    assert_eq!(seen, (false, true, false));
}

#[test]
fn random_bytes_follow_the_host_stream() {
    let (a, b, c, empty, seed) = run(|| {
        unsafe { raw::mh_rng_set_seed(1) };
        let a = random_bytes(8);
        let b = random_bytes(8);
        unsafe { raw::mh_rng_set_seed(1) };
        let c = random_bytes(8);
        let empty = random_bytes(0);
        unsafe { raw::mh_rng_set_seed(1) };
        let seed: [u8; 8] = random_seed();
        (a, b, c, empty, seed)
    });
    assert_ne!(a, b);
    assert_eq!(a, c);
    assert!(empty.is_empty());
    assert_eq!(seed.as_slice(), a.as_slice());
}

#[test]
fn handles_round_trip_bitwise() {
    run(|| {
        let cell = unsafe { raw::mh_scalar_real(1.0) };
        let h = ValueHandle::from_raw(cell);
        assert_eq!(h.into_raw(), cell);
        let back: RawCellRef = ValueHandle::from(cell).into();
        assert_eq!(back, cell);
        assert_eq!(unsafe { std::mem::transmute::<ValueHandle, usize>(h) }, cell as usize);
    });
}
