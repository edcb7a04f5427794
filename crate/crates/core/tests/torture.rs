mod common;

use common::{depth, run};
use hostbridge_core::raw::{self, RawCellRef};
use hostbridge_core::{ProtectGuard, ValueHandle};

extern "C" fn square_minus_4(x: RawCellRef) -> RawCellRef {
    unsafe {
        let v = raw::mh_as_real(x);
        raw::mh_scalar_real(v * v - 4.0)
    }
}

#[test]
fn guarded_cells_survive_collection_on_every_allocation() {
    let base = run(depth);
    let collections = mini_host::with_torture(|| {
        let start = unsafe { raw::mh_collections() };
        let mut pc = ProtectGuard::new();
        let (v, view) = ValueHandle::new_vector_double(5, &mut pc);
        view.copy_from_slice(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        let (m, mview) = ValueHandle::new_matrix_integer(2, 2, &mut pc);
        mview.copy_from_slice(&[1, 2, 3, 4]);
        let ints = ValueHandle::new(&[7, 8][..], &mut pc);
        let (copy, _) = ints.coerce_double(&mut pc).unwrap();
        let list = ValueHandle::new_list(2, &mut pc);
        list.names_gets(ValueHandle::new(["a", "b"], &mut pc));
        list.set_list_element(0, ValueHandle::new(1.5, &mut pc));
        list.set_list_element(1, ValueHandle::new_string_array(&["s"], &mut pc));

        let rho = ValueHandle::new_environment(ValueHandle::global_env(), &mut pc);
        let x = ValueHandle::new_symbol("x", &mut pc);
        x.assign(ValueHandle::new(3.0, &mut pc), rho);
        let f = unsafe { ValueHandle::new_callable(square_minus_4 as raw::MhFnPtr, &["x"], &mut pc) };
        let y = f.eval(rho, &mut pc).unwrap();
        for _ in 0..20 {
            unsafe { raw::mh_collect() };
            ValueHandle::new_vector_double(1, &mut ProtectGuard::new());
        }

        for h in [v, m, ints, copy, list, rho, x, f, y] {
            assert_eq!(unsafe { raw::mh_is_poisoned(h.into_raw()) }, 0);
        }
        assert_eq!(v.slice_double().unwrap(), &[1.0, 2.0, 3.0, 4.0, 5.0][..]);
        assert_eq!(m.slice_integer().unwrap(), &[1, 2, 3, 4][..]);
        assert_eq!(copy.slice_double().unwrap(), &[7.0, 8.0][..]);
        assert_eq!(list.get_list_element_by_name("a").unwrap().as_f64(), Ok(1.5));
        assert_eq!(list.get_list_element(1).unwrap().get_string(0).as_deref(), Ok("s"));
        assert_eq!(x.lookup(rho).unwrap().as_f64(), Ok(3.0));
        assert_eq!(y.as_f64(), Ok(5.0));
        unsafe { raw::mh_collections() - start }
    });
    assert!(collections > 20);
    assert_eq!(run(depth), base);
}

#[test]
fn unprotected_sibling_is_poisoned() {
    let (kept, lost) = mini_host::with_torture(|| unsafe {
        let kept = raw::mh_protect(raw::mh_alloc_vector(raw::MH_REAL, 2));
        let lost = raw::mh_alloc_vector(raw::MH_REAL, 2);
        raw::mh_alloc_vector(raw::MH_REAL, 1);
        let out = (raw::mh_is_poisoned(kept), raw::mh_is_poisoned(lost));
        raw::mh_unprotect(1);
        out
    });
    assert_eq!(kept, 0);
    assert_eq!(lost, 1);
}
