//! C ABI over `sphere-fv`. Handles are opaque and owned by the caller, who
//! releases them with the matching `*_free`. Every function returns an
//! [`SfvStatus`]; on failure, [`sfv_last_error_message`] describes it.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::sync::Arc;

use sphere_fv::cli::{self, CliError, ScenarioConfig};
use sphere_fv::diagnostics::mass;
use sphere_fv::fvm::{init_state, FvmError, Scheme, SolverState};
use sphere_fv::mesh::SphereMesh;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SfvStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// Malformed scenario, unknown flux, or bad mesh parameters.
    Config = 3,
    /// The scheme failed while stepping (non-finite state, degenerate CFL).
    Runtime = 4,
    Io = 5,
    /// A run finished but an asserted invariant failed.
    InvariantFailed = 6,
    Panic = 7,
}

/// A latitude-longitude mesh with two polar caps.
pub struct SfvMesh {
    mesh: Arc<SphereMesh>,
}

/// A scheme with its current state.
pub struct SfvSolver {
    scheme: Scheme,
    state: SolverState,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn fail(status: SfvStatus, msg: impl Into<String>) -> SfvStatus {
    set_error(msg);
    status
}

fn from_cli(e: CliError) -> SfvStatus {
    let status = match &e {
        CliError::Config(_) | CliError::Fvm(FvmError::Config(_)) | CliError::Flux(_) => SfvStatus::Config,
        CliError::Fvm(_) => SfvStatus::Runtime,
        CliError::Io { .. } => SfvStatus::Io,
    };
    fail(status, e.to_string())
}

fn from_fvm(e: FvmError) -> SfvStatus {
    from_cli(CliError::Fvm(e))
}

fn guard(f: impl FnOnce() -> SfvStatus) -> SfvStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<&str>()
            .map(|s| s.to_string())
            .or_else(|| p.downcast_ref::<String>().cloned())
            .unwrap_or_else(|| "panic".into());
        fail(SfvStatus::Panic, msg)
    })
}

unsafe fn read_str<'a>(s: *const c_char, what: &str) -> Result<&'a str, SfvStatus> {
    if s.is_null() {
        return Err(fail(SfvStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| fail(SfvStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

macro_rules! deref {
    ($p:expr, $what:literal) => {
        match $p.as_ref() {
            Some(v) => v,
            None => return fail(SfvStatus::NullPointer, concat!($what, " is null")),
        }
    };
    (mut $p:expr, $what:literal) => {
        match $p.as_mut() {
            Some(v) => v,
            None => return fail(SfvStatus::NullPointer, concat!($what, " is null")),
        }
    };
}

/// Message of the last failed call on this thread, or null. The string is
/// owned by the caller and released with [`sfv_string_free`].
#[no_mangle]
pub extern "C" fn sfv_last_error_message() -> *mut c_char {
    LAST_ERROR.with(|e| e.borrow().clone().map_or(ptr::null_mut(), CString::into_raw))
}

/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn sfv_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// # Safety
/// `out` must be valid for writing a pointer.
#[no_mangle]
pub unsafe extern "C" fn sfv_mesh_new(n_phi: usize, n_theta: usize, theta_min: f64, out: *mut *mut SfvMesh) -> SfvStatus {
    guard(|| {
        let out = deref!(mut out, "out");
        *out = ptr::null_mut();
        match SphereMesh::build_latlon(n_phi, n_theta, theta_min) {
            Ok(m) => {
                *out = Box::into_raw(Box::new(SfvMesh { mesh: Arc::new(m) }));
                SfvStatus::Ok
            }
            Err(e) => fail(SfvStatus::Config, e.to_string()),
        }
    })
}

/// # Safety
/// `mesh` must be null or a live handle from [`sfv_mesh_new`].
#[no_mangle]
pub unsafe extern "C" fn sfv_mesh_free(mesh: *mut SfvMesh) {
    if !mesh.is_null() {
        drop(Box::from_raw(mesh));
    }
}

/// # Safety
/// `mesh` must be a live handle and `out` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn sfv_mesh_cell_count(mesh: *const SfvMesh, out: *mut usize) -> SfvStatus {
    guard(|| {
        let mesh = deref!(mesh, "mesh");
        *deref!(mut out, "out") = mesh.mesh.cells.len();
        SfvStatus::Ok
    })
}

/// Copy the cell areas into `buf`, which holds `len` doubles.
///
/// # Safety
/// `mesh` must be a live handle and `buf` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn sfv_mesh_cell_areas(mesh: *const SfvMesh, buf: *mut f64, len: usize) -> SfvStatus {
    guard(|| {
        let mesh = deref!(mesh, "mesh");
        let n = mesh.mesh.cells.len();
        if buf.is_null() {
            return fail(SfvStatus::NullPointer, "buf is null");
        }
        if len < n {
            return fail(SfvStatus::InvalidArgument, format!("buf holds {len} values, mesh has {n} cells"));
        }
        let out = std::slice::from_raw_parts_mut(buf, n);
        for (o, c) in out.iter_mut().zip(&mesh.mesh.cells) {
            *o = c.area;
        }
        SfvStatus::Ok
    })
}

/// Build a solver from a scenario in JSON, with the state set to the cell
/// averages of its initial data.
///
/// # Safety
/// `config_json` must be a NUL-terminated string and `out` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn sfv_solver_new(config_json: *const c_char, out: *mut *mut SfvSolver) -> SfvStatus {
    guard(|| {
        let out = deref!(mut out, "out");
        *out = ptr::null_mut();
        let text = match read_str(config_json, "config_json") {
            Ok(t) => t,
            Err(s) => return s,
        };
        let built = ScenarioConfig::from_json(text).and_then(|c| c.build());
        let scenario = match built {
            Ok(s) => s,
            Err(e) => return from_cli(e),
        };
        let state = match init_state(scenario.mesh.clone(), scenario.initial.as_ref()) {
            Ok(s) => s,
            Err(e) => return from_fvm(e),
        };
        match Scheme::for_run(
            scenario.flux.clone(),
            scenario.config.numerical_flux.clone(),
            &state,
            scenario.config.t_end,
        ) {
            Ok(scheme) => {
                *out = Box::into_raw(Box::new(SfvSolver { scheme, state }));
                SfvStatus::Ok
            }
            Err(e) => from_fvm(e),
        }
    })
}

/// # Safety
/// `solver` must be null or a live handle from [`sfv_solver_new`].
#[no_mangle]
pub unsafe extern "C" fn sfv_solver_free(solver: *mut SfvSolver) {
    if !solver.is_null() {
        drop(Box::from_raw(solver));
    }
}

/// A new handle to the solver's mesh, released with [`sfv_mesh_free`].
///
/// # Safety
/// `solver` must be a live handle and `out` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn sfv_solver_mesh(solver: *const SfvSolver, out: *mut *mut SfvMesh) -> SfvStatus {
    guard(|| {
        let s = deref!(solver, "solver");
        *deref!(mut out, "out") = Box::into_raw(Box::new(SfvMesh {
            mesh: s.state.mesh.clone(),
        }));
        SfvStatus::Ok
    })
}

/// Take `steps` steps of the CFL timestep.
///
/// # Safety
/// `solver` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn sfv_solver_step(solver: *mut SfvSolver, steps: usize) -> SfvStatus {
    guard(|| {
        let s = deref!(mut solver, "solver");
        for _ in 0..steps {
            if let Err(e) = s.scheme.ensure_bounds(&s.state.u) {
                return from_fvm(e);
            }
            match s.scheme.step(&s.state, s.scheme.tau()) {
                Ok((next, _)) => s.state = next,
                Err(e) => return from_fvm(e),
            }
        }
        SfvStatus::Ok
    })
}

/// Advance to time `t`, shortening the last step to land on it.
///
/// # Safety
/// `solver` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn sfv_solver_advance_to(solver: *mut SfvSolver, t: f64) -> SfvStatus {
    guard(|| {
        let s = deref!(mut solver, "solver");
        if !(t >= s.state.t && t.is_finite()) {
            return fail(SfvStatus::InvalidArgument, format!("t = {t} is before the current time {}", s.state.t));
        }
        match s.scheme.run(s.state.clone(), t, |_, _, _| Ok(())) {
            Ok(end) => {
                s.state = end;
                SfvStatus::Ok
            }
            Err(e) => from_fvm(e),
        }
    })
}

/// # Safety
/// `solver` must be a live handle and `t`, `tau`, `steps` null or writable.
#[no_mangle]
pub unsafe extern "C" fn sfv_solver_time(solver: *const SfvSolver, t: *mut f64, tau: *mut f64, steps: *mut usize) -> SfvStatus {
    guard(|| {
        let s = deref!(solver, "solver");
        if let Some(t) = t.as_mut() {
            *t = s.state.t;
        }
        if let Some(tau) = tau.as_mut() {
            *tau = s.scheme.tau();
        }
        if let Some(n) = steps.as_mut() {
            *n = s.state.n;
        }
        SfvStatus::Ok
    })
}

/// Copy the cell averages into `buf`, which holds `len` doubles.
///
/// # Safety
/// `solver` must be a live handle and `buf` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn sfv_solver_state(solver: *const SfvSolver, buf: *mut f64, len: usize) -> SfvStatus {
    guard(|| {
        let s = deref!(solver, "solver");
        let n = s.state.u.len();
        if buf.is_null() {
            return fail(SfvStatus::NullPointer, "buf is null");
        }
        if len < n {
            return fail(SfvStatus::InvalidArgument, format!("buf holds {len} values, mesh has {n} cells"));
        }
        std::slice::from_raw_parts_mut(buf, n).copy_from_slice(&s.state.u);
        SfvStatus::Ok
    })
}

/// Replace the cell averages; `len` must equal the cell count.
///
/// # Safety
/// `solver` must be a live handle and `buf` valid for `len` reads.
#[no_mangle]
pub unsafe extern "C" fn sfv_solver_set_state(solver: *mut SfvSolver, buf: *const f64, len: usize) -> SfvStatus {
    guard(|| {
        let s = deref!(mut solver, "solver");
        if buf.is_null() {
            return fail(SfvStatus::NullPointer, "buf is null");
        }
        if len != s.state.u.len() {
            return fail(SfvStatus::InvalidArgument, format!("expected {} values, got {len}", s.state.u.len()));
        }
        let u = std::slice::from_raw_parts(buf, len);
        if let Some(k) = u.iter().position(|v| !v.is_finite()) {
            return fail(SfvStatus::InvalidArgument, format!("value for cell {k} is not finite"));
        }
        s.state.u.copy_from_slice(u);
        SfvStatus::Ok
    })
}

/// `Σ_K u_K |K|`.
///
/// # Safety
/// `solver` must be a live handle and `out` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn sfv_solver_mass(solver: *const SfvSolver, out: *mut f64) -> SfvStatus {
    guard(|| {
        let s = deref!(solver, "solver");
        *deref!(mut out, "out") = mass(&s.state.mesh, &s.state.u);
        SfvStatus::Ok
    })
}

/// Run a scenario with all diagnostics, writing its files into `out_dir`.
/// Returns [`SfvStatus::InvariantFailed`] when the run completed but a
/// monitored invariant did not hold.
///
/// # Safety
/// Both arguments must be NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn sfv_run_scenario(config_json: *const c_char, out_dir: *const c_char) -> SfvStatus {
    guard(|| {
        let (text, dir) = match (read_str(config_json, "config_json"), read_str(out_dir, "out_dir")) {
            (Ok(t), Ok(d)) => (t, d),
            (Err(s), _) | (_, Err(s)) => return s,
        };
        let scenario = match ScenarioConfig::from_json(text).and_then(|c| c.build()) {
            Ok(s) => s,
            Err(e) => return from_cli(e),
        };
        match cli::run_scenario(&scenario, Path::new(dir)) {
            Ok(r) if r.passed => SfvStatus::Ok,
            Ok(_) => fail(SfvStatus::InvariantFailed, "an asserted invariant failed; see report.json"),
            Err(e) => from_cli(e),
        }
    })
}
