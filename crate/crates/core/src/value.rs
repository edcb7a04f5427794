use alloc::string::String;
use alloc::vec::Vec;
use core::ffi::{c_char, CStr};
use core::fmt;
use core::ptr;

use crate::catch::{host_catch, last_host_error};
use crate::na;
use crate::raw::{self, RawCellRef};
use crate::{ApiError, ProtectGuard};

/// Kind tag of a host cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CellKind {
    Null,
    Real,
    Integer,
    Logical,
    String,
    Symbol,
    List,
    Environment,
    Callable,
}

impl CellKind {
    pub fn from_raw(kind: i32) -> CellKind {
        match kind {
            raw::MH_REAL => CellKind::Real,
            raw::MH_INTEGER => CellKind::Integer,
            raw::MH_LOGICAL => CellKind::Logical,
            raw::MH_STRING => CellKind::String,
            raw::MH_SYMBOL => CellKind::Symbol,
            raw::MH_LIST => CellKind::List,
            raw::MH_ENVIRONMENT => CellKind::Environment,
            raw::MH_CALLABLE => CellKind::Callable,
            _ => CellKind::Null,
        }
    }

    pub fn to_raw(self) -> i32 {
        match self {
            CellKind::Null => raw::MH_NULL,
            CellKind::Real => raw::MH_REAL,
            CellKind::Integer => raw::MH_INTEGER,
            CellKind::Logical => raw::MH_LOGICAL,
            CellKind::String => raw::MH_STRING,
            CellKind::Symbol => raw::MH_SYMBOL,
            CellKind::List => raw::MH_LIST,
            CellKind::Environment => raw::MH_ENVIRONMENT,
            CellKind::Callable => raw::MH_CALLABLE,
        }
    }

    /// Kinds whose scalar value the host can coerce to a number.
    fn is_scalar_coercible(self) -> bool {
        matches!(
            self,
            CellKind::Null
                | CellKind::Real
                | CellKind::Integer
                | CellKind::Logical
                | CellKind::String
        )
    }
}

impl fmt::Display for CellKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CellKind::Null => "null",
            CellKind::Real => "real vector",
            CellKind::Integer => "integer vector",
            CellKind::Logical => "logical vector",
            CellKind::String => "string vector",
            CellKind::Symbol => "symbol",
            CellKind::List => "list",
            CellKind::Environment => "environment",
            CellKind::Callable => "callable",
        })
    }
}

/// A host cell reference.
///
/// Same size and representation as [`RawCellRef`]; `.0` gives the raw
/// reference for direct host calls and `ValueHandle(raw)` wraps one back.
/// A handle does not keep its cell alive: cells obtained from guarded
/// constructors are protected by their guard, and arguments passed in by the
/// host are protected by the host for the duration of the call.
///
/// Slices returned by the view methods point into host memory. They stay
/// valid while the cell is protected, and nothing prevents taking two
/// overlapping views of one cell.
#[repr(transparent)]
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct ValueHandle(pub RawCellRef);

impl fmt::Debug for ValueHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ValueHandle({:p}: {})", self.0, self.kind())
    }
}

fn c_string(text: &str) -> Vec<u8> {
    assert!(
        !text.as_bytes().contains(&0),
        "string contains an interior NUL byte: {text:?}"
    );
    let mut buf = Vec::with_capacity(text.len() + 1);
    buf.extend_from_slice(text.as_bytes());
    buf.push(0);
    buf
}

fn checked_length(len: usize) -> i64 {
    match i64::try_from(len) {
        Ok(n) if n <= raw::MH_MAX_LENGTH => n,
        _ => panic!("vector length {len} exceeds the host limit"),
    }
}

/// Allocates and protects a vector. Allocation failure panics.
fn alloc_vector(kind: i32, len: usize, pc: &mut ProtectGuard) -> RawCellRef {
    let len = checked_length(len);
    let mut cell = ptr::null_mut();
    if let Err(msg) = host_catch(|| cell = unsafe { raw::mh_alloc_vector(kind, len) }) {
        panic!("allocation failed: {msg}");
    }
    pc.protect(cell)
}

unsafe fn view<'a, T>(cell: RawCellRef, kind: i32) -> &'a mut [T] {
    let len = raw::mh_length(cell) as usize;
    let data = raw::mh_raw_view(cell, kind).cast::<T>();
    core::slice::from_raw_parts_mut(data, len)
}

impl ValueHandle {
    pub fn from_raw(cell: RawCellRef) -> Self {
        ValueHandle(cell)
    }

    pub fn into_raw(self) -> RawCellRef {
        self.0
    }

    /// The host's null cell.
    pub fn null() -> Self {
        ValueHandle(unsafe { raw::mh_null() })
    }

    /// Converts a guest value into a new protected host cell.
    pub fn new<T: IntoValue>(value: T, pc: &mut ProtectGuard) -> Self {
        value.into_value(pc)
    }

    pub fn kind(self) -> CellKind {
        CellKind::from_raw(unsafe { raw::mh_kind(self.0) })
    }

    /// Element count of vectors and lists, binding count of environments,
    /// 0 for null and 1 for other cells.
    pub fn len(self) -> usize {
        unsafe { raw::mh_length(self.0) as usize }
    }

    pub fn is_empty(self) -> bool {
        self.len() == 0
    }

    pub fn is_null(self) -> bool {
        self.kind() == CellKind::Null
    }

    pub fn is_double(self) -> bool {
        unsafe { raw::mh_is_real(self.0) != 0 }
    }

    pub fn is_integer(self) -> bool {
        unsafe { raw::mh_is_integer(self.0) != 0 }
    }

    pub fn is_logical(self) -> bool {
        unsafe { raw::mh_is_logical(self.0) != 0 }
    }

    pub fn is_double_or_integer(self) -> bool {
        self.is_double() || self.is_integer()
    }

    // ---- constructors ----

    pub fn new_vector_double<'a>(len: usize, pc: &mut ProtectGuard) -> (Self, &'a mut [f64]) {
        let cell = alloc_vector(raw::MH_REAL, len, pc);
        (ValueHandle(cell), unsafe { view(cell, raw::MH_REAL) })
    }

    pub fn new_vector_integer<'a>(len: usize, pc: &mut ProtectGuard) -> (Self, &'a mut [i32]) {
        let cell = alloc_vector(raw::MH_INTEGER, len, pc);
        (ValueHandle(cell), unsafe { view(cell, raw::MH_INTEGER) })
    }

    pub fn new_vector_logical<'a>(len: usize, pc: &mut ProtectGuard) -> (Self, &'a mut [i32]) {
        let cell = alloc_vector(raw::MH_LOGICAL, len, pc);
        (ValueHandle(cell), unsafe { view(cell, raw::MH_LOGICAL) })
    }

    fn new_matrix(kind: i32, nrow: usize, ncol: usize, pc: &mut ProtectGuard) -> RawCellRef {
        let (Ok(r), Ok(c)) = (i32::try_from(nrow), i32::try_from(ncol)) else {
            panic!("matrix dimensions {nrow} x {ncol} exceed the host limit");
        };
        let len = nrow
            .checked_mul(ncol)
            .unwrap_or_else(|| panic!("matrix dimensions {nrow} x {ncol} overflow"));
        let cell = alloc_vector(kind, len, pc);
        unsafe { raw::mh_set_dim(cell, r, c) };
        cell
    }

    /// Column-major real matrix, zero-initialized.
    pub fn new_matrix_double<'a>(
        nrow: usize,
        ncol: usize,
        pc: &mut ProtectGuard,
    ) -> (Self, &'a mut [f64]) {
        let cell = Self::new_matrix(raw::MH_REAL, nrow, ncol, pc);
        (ValueHandle(cell), unsafe { view(cell, raw::MH_REAL) })
    }

    /// Column-major integer matrix, zero-initialized.
    pub fn new_matrix_integer<'a>(
        nrow: usize,
        ncol: usize,
        pc: &mut ProtectGuard,
    ) -> (Self, &'a mut [i32]) {
        let cell = Self::new_matrix(raw::MH_INTEGER, nrow, ncol, pc);
        (ValueHandle(cell), unsafe { view(cell, raw::MH_INTEGER) })
    }

    pub fn new_scalar_double(x: f64, pc: &mut ProtectGuard) -> Self {
        let (v, s) = Self::new_vector_double(1, pc);
        s[0] = x;
        v
    }

    pub fn new_scalar_integer(x: i32, pc: &mut ProtectGuard) -> Self {
        let (v, s) = Self::new_vector_integer(1, pc);
        s[0] = x;
        v
    }

    pub fn new_scalar_logical(x: bool, pc: &mut ProtectGuard) -> Self {
        let (v, s) = Self::new_vector_logical(1, pc);
        s[0] = x as i32;
        v
    }

    pub fn new_string_array<S: AsRef<str>>(texts: &[S], pc: &mut ProtectGuard) -> Self {
        let cell = alloc_vector(raw::MH_STRING, texts.len(), pc);
        for (i, text) in texts.iter().enumerate() {
            let buf = c_string(text.as_ref());
            unsafe { raw::mh_set_string_elt(cell, i as i64, buf.as_ptr().cast()) };
        }
        ValueHandle(cell)
    }

    pub fn new_list(len: usize, pc: &mut ProtectGuard) -> Self {
        ValueHandle(alloc_vector(raw::MH_LIST, len, pc))
    }

    /// Interned symbol; the same name always yields the same cell.
    pub fn new_symbol(name: &str, pc: &mut ProtectGuard) -> Self {
        assert!(!name.is_empty(), "symbol names must be nonempty");
        let buf = c_string(name);
        let mut cell = ptr::null_mut();
        if let Err(msg) = host_catch(|| cell = unsafe { raw::mh_install(buf.as_ptr().cast()) }) {
            panic!("cannot install symbol '{name}': {msg}");
        }
        ValueHandle(pc.protect(cell))
    }

    pub fn global_env() -> Self {
        ValueHandle(unsafe { raw::mh_global_env() })
    }

    /// New empty environment enclosed by `parent` (an environment or null).
    pub fn new_environment(parent: ValueHandle, pc: &mut ProtectGuard) -> Self {
        let kind = parent.kind();
        assert!(
            matches!(kind, CellKind::Environment | CellKind::Null),
            "environment parent must be an environment, found a {kind}"
        );
        let mut cell = ptr::null_mut();
        if let Err(msg) = host_catch(|| cell = unsafe { raw::mh_new_env(parent.0) }) {
            panic!("cannot allocate environment: {msg}");
        }
        ValueHandle(pc.protect(cell))
    }

    /// Callable wrapping a native function of `formals.len()` cell arguments.
    /// Evaluating the callable directly looks its formals up by name.
    ///
    /// # Safety
    /// `f` must be an `extern "C"` function taking exactly `formals.len()`
    /// [`RawCellRef`] arguments and returning a [`RawCellRef`].
    pub unsafe fn new_callable(f: raw::MhFnPtr, formals: &[&str], pc: &mut ProtectGuard) -> Self {
        assert!(
            formals.len() <= raw::MH_MAX_ARITY as usize,
            "callables take at most {} arguments",
            raw::MH_MAX_ARITY
        );
        let bufs: Vec<Vec<u8>> = formals.iter().map(|s| c_string(s)).collect();
        assert!(bufs.iter().all(|b| b.len() > 1), "formal names must be nonempty");
        let ptrs: Vec<*const c_char> = bufs.iter().map(|b| b.as_ptr().cast()).collect();
        let arity = formals.len() as i32;
        let mut cell = ptr::null_mut();
        if let Err(msg) =
            host_catch(|| cell = unsafe { raw::mh_new_callable(f, arity, ptrs.as_ptr()) })
        {
            panic!("cannot create callable: {msg}");
        }
        ValueHandle(pc.protect(cell))
    }

    /// Call form: `callable` applied to the values bound to `args` at
    /// evaluation time.
    pub fn new_call_form(callable: ValueHandle, args: &[&str], pc: &mut ProtectGuard) -> Self {
        let kind = callable.kind();
        assert!(kind == CellKind::Callable, "call form head must be a callable, found a {kind}");
        let form = Self::new_list(args.len() + 1, pc);
        form.set_list_element(0, callable);
        for (i, name) in args.iter().enumerate() {
            let sym = Self::new_symbol(name, pc);
            form.set_list_element(i + 1, sym);
        }
        form
    }

    // ---- views and coercion ----

    fn checked_view<'a, T>(self, kind: CellKind) -> Result<&'a mut [T], ApiError> {
        let found = self.kind();
        if found != kind {
            return Err(ApiError::KindMismatch {
                expected: kind,
                found,
            });
        }
        Ok(unsafe { view(self.0, kind.to_raw()) })
    }

    /// View of a real vector's storage; no allocation, no copy.
    pub fn slice_double<'a>(self) -> Result<&'a mut [f64], ApiError> {
        self.checked_view(CellKind::Real)
    }

    pub fn slice_integer<'a>(self) -> Result<&'a mut [i32], ApiError> {
        self.checked_view(CellKind::Integer)
    }

    pub fn slice_logical<'a>(self) -> Result<&'a mut [i32], ApiError> {
        self.checked_view(CellKind::Logical)
    }

    fn coerce_vector(self, kind: CellKind, pc: &mut ProtectGuard) -> Result<RawCellRef, ApiError> {
        let found = self.kind();
        if found == kind {
            return Ok(self.0);
        }
        if !matches!(found, CellKind::Real | CellKind::Integer | CellKind::Logical) {
            return Err(ApiError::NotCoercible {
                found,
                target: match kind {
                    CellKind::Real => "double",
                    _ => "integer",
                },
            });
        }
        let mut cell = ptr::null_mut();
        host_catch(|| cell = unsafe { raw::mh_coerce(self.0, kind.to_raw()) })
            .map_err(ApiError::Host)?;
        Ok(pc.protect(cell))
    }

    /// Returns this handle itself when it already holds doubles, otherwise
    /// a protected converted copy of an integer or logical vector.
    pub fn coerce_double<'a>(
        self,
        pc: &mut ProtectGuard,
    ) -> Result<(ValueHandle, &'a mut [f64]), ApiError> {
        let cell = self.coerce_vector(CellKind::Real, pc)?;
        Ok((ValueHandle(cell), unsafe { view(cell, raw::MH_REAL) }))
    }

    pub fn coerce_integer<'a>(
        self,
        pc: &mut ProtectGuard,
    ) -> Result<(ValueHandle, &'a mut [i32]), ApiError> {
        let cell = self.coerce_vector(CellKind::Integer, pc)?;
        Ok((ValueHandle(cell), unsafe { view(cell, raw::MH_INTEGER) }))
    }

    /// First element as a double, by the host coercion rules.
    pub fn as_f64(self) -> Result<f64, ApiError> {
        let found = self.kind();
        if !found.is_scalar_coercible() {
            return Err(ApiError::NotCoercible {
                found,
                target: "double",
            });
        }
        Ok(unsafe { raw::mh_as_real(self.0) })
    }

    /// First element as an integer, by the host coercion rules
    /// (truncation toward zero, NA for NaN and out-of-range values).
    pub fn as_i32(self) -> Result<i32, ApiError> {
        let found = self.kind();
        if !found.is_scalar_coercible() {
            return Err(ApiError::NotCoercible {
                found,
                target: "integer",
            });
        }
        Ok(unsafe { raw::mh_as_integer(self.0) })
    }

    /// First element as a boolean; `None` for NA.
    pub fn as_bool(self) -> Result<Option<bool>, ApiError> {
        if self.is_double() {
            let d = self.as_f64()?;
            return Ok((!d.is_nan()).then_some(d != 0.0));
        }
        let x = self.as_i32()?;
        Ok((!na::is_na_integer(x)).then_some(x != 0))
    }

    pub fn get_string(self, index: usize) -> Result<String, ApiError> {
        let found = self.kind();
        if found != CellKind::String {
            return Err(ApiError::KindMismatch {
                expected: CellKind::String,
                found,
            });
        }
        self.check_index(index)?;
        let text = unsafe { CStr::from_ptr(raw::mh_string_elt(self.0, index as i64)) };
        Ok(text.to_string_lossy().into_owned())
    }

    pub fn symbol_name(self) -> Result<String, ApiError> {
        let found = self.kind();
        if found != CellKind::Symbol {
            return Err(ApiError::KindMismatch {
                expected: CellKind::Symbol,
                found,
            });
        }
        let text = unsafe { CStr::from_ptr(raw::mh_symbol_name(self.0)) };
        Ok(text.to_string_lossy().into_owned())
    }

    // ---- matrices ----

    fn dims(self) -> Option<(usize, usize)> {
        let (r, c) = unsafe { (raw::mh_nrow(self.0), raw::mh_ncol(self.0)) };
        (r >= 0 && c >= 0).then_some((r as usize, c as usize))
    }

    pub fn nrow(self) -> Result<usize, ApiError> {
        self.dims().map(|d| d.0).ok_or(ApiError::NotAMatrix)
    }

    pub fn ncol(self) -> Result<usize, ApiError> {
        self.dims().map(|d| d.1).ok_or(ApiError::NotAMatrix)
    }

    pub fn is_matrix(self) -> bool {
        self.dims().is_some()
    }

    pub fn is_square_matrix(self) -> bool {
        matches!(self.dims(), Some((r, c)) if r == c)
    }

    // ---- lists and names ----

    fn check_index(self, index: usize) -> Result<(), ApiError> {
        let length = self.len();
        if index < length {
            Ok(())
        } else {
            Err(ApiError::OutOfRange { index, length })
        }
    }

    /// Stores `value` at `index`. Panics if this is not a list or the index
    /// is out of range.
    pub fn set_list_element(self, index: usize, value: ValueHandle) {
        let kind = self.kind();
        assert!(kind == CellKind::List, "set_list_element on a {kind}");
        if let Err(e) = self.check_index(index) {
            panic!("set_list_element: {e}");
        }
        unsafe { raw::mh_set_list_elt(self.0, index as i64, value.0) };
    }

    pub fn get_list_element(self, index: usize) -> Result<ValueHandle, ApiError> {
        let found = self.kind();
        if found != CellKind::List {
            return Err(ApiError::KindMismatch {
                expected: CellKind::List,
                found,
            });
        }
        self.check_index(index)?;
        Ok(ValueHandle(unsafe { raw::mh_list_elt(self.0, index as i64) }))
    }

    pub fn get_list_element_by_name(self, name: &str) -> Result<ValueHandle, ApiError> {
        let names = self
            .names()
            .ok_or_else(|| ApiError::NoSuchName(String::from(name)))?;
        for i in 0..names.len() {
            if names.get_string(i)? == name {
                return self.get_list_element(i);
            }
        }
        Err(ApiError::NoSuchName(String::from(name)))
    }

    /// Attaches `names` (a string vector of the same length). Panics on a
    /// kind or length mismatch.
    pub fn names_gets(self, names: ValueHandle) {
        let kind = names.kind();
        assert!(kind == CellKind::String, "names must be a string vector, found a {kind}");
        let target = self.kind();
        assert!(
            matches!(
                target,
                CellKind::List
                    | CellKind::Real
                    | CellKind::Integer
                    | CellKind::Logical
                    | CellKind::String
            ),
            "cannot attach names to a {target}"
        );
        assert_eq!(
            names.len(),
            self.len(),
            "names length must equal the value's length"
        );
        unsafe { raw::mh_set_names(self.0, names.0) };
    }

    pub fn names(self) -> Option<ValueHandle> {
        let names = ValueHandle(unsafe { raw::mh_names(self.0) });
        (!names.is_null()).then_some(names)
    }

    // ---- environments and evaluation ----

    /// Binds this symbol to `value` in `env`, replacing any earlier binding.
    pub fn assign(self, value: ValueHandle, env: ValueHandle) {
        let kind = self.kind();
        assert!(kind == CellKind::Symbol, "assign on a {kind}, expected a symbol");
        let env_kind = env.kind();
        assert!(
            env_kind == CellKind::Environment,
            "assign into a {env_kind}, expected an environment"
        );
        unsafe { raw::mh_define_var(self.0, value.0, env.0) };
    }

    /// Looks this symbol up in `env` and its parents.
    pub fn lookup(self, env: ValueHandle) -> Option<ValueHandle> {
        let kind = self.kind();
        assert!(kind == CellKind::Symbol, "lookup on a {kind}, expected a symbol");
        let env_kind = env.kind();
        assert!(
            env_kind == CellKind::Environment,
            "lookup in a {env_kind}, expected an environment"
        );
        let cell = unsafe { raw::mh_find_var(self.0, env.0) };
        (!cell.is_null()).then_some(ValueHandle(cell))
    }

    /// Evaluates this callable or call form in `env`. Host errors are caught
    /// and returned; the result is protected through `pc`.
    pub fn eval(self, env: ValueHandle, pc: &mut ProtectGuard) -> Result<ValueHandle, ApiError> {
        let mut ok = 0i32;
        let cell = unsafe { raw::mh_try_eval(self.0, env.0, &mut ok) };
        if ok == 0 {
            return Err(ApiError::Eval(last_host_error()));
        }
        Ok(ValueHandle(pc.protect(cell)))
    }

    // ---- missing values ----

    pub fn is_na_integer(x: i32) -> bool {
        na::is_na_integer(x)
    }

    pub fn is_na_logical(x: i32) -> bool {
        na::is_na_logical(x)
    }

    pub fn is_na_real(x: f64) -> bool {
        na::is_na_real(x)
    }
}

impl From<ValueHandle> for RawCellRef {
    fn from(v: ValueHandle) -> Self {
        v.0
    }
}

impl From<RawCellRef> for ValueHandle {
    fn from(cell: RawCellRef) -> Self {
        ValueHandle(cell)
    }
}

/// Guest values that can be copied into a new host cell.
pub trait IntoValue {
    fn into_value(self, pc: &mut ProtectGuard) -> ValueHandle;
}

impl IntoValue for f64 {
    fn into_value(self, pc: &mut ProtectGuard) -> ValueHandle {
        ValueHandle::new_scalar_double(self, pc)
    }
}

impl IntoValue for i32 {
    fn into_value(self, pc: &mut ProtectGuard) -> ValueHandle {
        ValueHandle::new_scalar_integer(self, pc)
    }
}

impl IntoValue for bool {
    fn into_value(self, pc: &mut ProtectGuard) -> ValueHandle {
        ValueHandle::new_scalar_logical(self, pc)
    }
}

impl IntoValue for &str {
    fn into_value(self, pc: &mut ProtectGuard) -> ValueHandle {
        ValueHandle::new_string_array(&[self], pc)
    }
}

impl<const N: usize> IntoValue for [&str; N] {
    fn into_value(self, pc: &mut ProtectGuard) -> ValueHandle {
        ValueHandle::new_string_array(&self, pc)
    }
}

impl IntoValue for &[f64] {
    fn into_value(self, pc: &mut ProtectGuard) -> ValueHandle {
        let (v, s) = ValueHandle::new_vector_double(self.len(), pc);
        s.copy_from_slice(self);
        v
    }
}

impl IntoValue for &[i32] {
    fn into_value(self, pc: &mut ProtectGuard) -> ValueHandle {
        let (v, s) = ValueHandle::new_vector_integer(self.len(), pc);
        s.copy_from_slice(self);
        v
    }
}

impl IntoValue for ValueHandle {
    fn into_value(self, _pc: &mut ProtectGuard) -> ValueHandle {
        self
    }
}
