//! C interface to the solver.
//!
//! Objects cross the boundary as opaque handles that the caller frees with
//! the matching `*_free` function. Every fallible call returns a
//! [`TdbemStatus`]; the message of the last failure on the calling thread is
//! available from [`tdbem_last_error`].

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::os::raw::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use tdbem::assembly::{AssemblyOptions, OperatorId, RhsId};
use tdbem::cli::{solve_problem, Solution};
use tdbem::geometry::{graded_disc_mesh_with_sectors, graded_square_mesh, Mesh};
use tdbem::mot::StepSolverConfig;
use tdbem::potentials::{evaluate_single_layer, EvalOptions};
use tdbem::timegrid::TimeGrid;
use tdbem::Error;

/// Result of a call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TdbemStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NumericalFailure = 3,
    BufferTooSmall = 4,
    Io = 5,
    Panic = 6,
}

/// Boundary integral formulation.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TdbemOperator {
    SingleLayer = 0,
    Hypersingular = 1,
    Dtn = 2,
}

/// Triangulated screen.
pub struct TdbemMesh {
    mesh: Mesh,
}

/// Marched density together with its system.
pub struct TdbemSolution {
    inner: Solution,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> TdbemStatus {
    match e {
        Error::Io(_) => TdbemStatus::Io,
        e if e.is_config_error() => TdbemStatus::InvalidArgument,
        _ => TdbemStatus::NumericalFailure,
    }
}

fn guard<F: FnOnce() -> Result<(), (TdbemStatus, String)>>(f: F) -> TdbemStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TdbemStatus::Ok,
        Ok(Err((s, m))) => {
            set_error(m);
            s
        }
        Err(_) => {
            set_error("internal panic".into());
            TdbemStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (TdbemStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (TdbemStatus, String) {
    (TdbemStatus::NullPointer, format!("{what} is null"))
}

/// Version string, static storage.
#[no_mangle]
pub extern "C" fn tdbem_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message of the last failure on this thread, or null. Valid until the next
/// failing call on the same thread.
#[no_mangle]
pub extern "C" fn tdbem_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

unsafe fn put_mesh(out: *mut *mut TdbemMesh, mesh: Mesh) {
    *out = Box::into_raw(Box::new(TdbemMesh { mesh }));
}

/// Graded mesh of the square `[-1, 1]^2` with `8 levels^2` triangles.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn tdbem_mesh_square(levels: usize, beta: f64, out: *mut *mut TdbemMesh) -> TdbemStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let m = graded_square_mesh(levels, beta).map_err(lib_err)?;
        put_mesh(out, m);
        Ok(())
    })
}

/// Graded mesh of the unit disc.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn tdbem_mesh_disc(
    levels: usize,
    beta: f64,
    sectors: usize,
    out: *mut *mut TdbemMesh,
) -> TdbemStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let m = graded_disc_mesh_with_sectors(levels, beta, sectors).map_err(lib_err)?;
        put_mesh(out, m);
        Ok(())
    })
}

/// Mesh from its JSON file format.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` as for [`tdbem_mesh_square`].
#[no_mangle]
pub unsafe extern "C" fn tdbem_mesh_from_json(json: *const c_char, out: *mut *mut TdbemMesh) -> TdbemStatus {
    guard(|| {
        if json.is_null() || out.is_null() {
            return Err(null("argument"));
        }
        let s = CStr::from_ptr(json)
            .to_str()
            .map_err(|_| (TdbemStatus::InvalidArgument, "mesh JSON is not UTF-8".to_string()))?;
        let m = Mesh::from_json(s).map_err(lib_err)?;
        put_mesh(out, m);
        Ok(())
    })
}

/// Number of triangles, 0 for a null handle.
///
/// # Safety
/// `mesh` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tdbem_mesh_num_triangles(mesh: *const TdbemMesh) -> usize {
    mesh.as_ref().map_or(0, |m| m.mesh.num_triangles())
}

/// Number of nodes, 0 for a null handle.
///
/// # Safety
/// `mesh` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tdbem_mesh_num_nodes(mesh: *const TdbemMesh) -> usize {
    mesh.as_ref().map_or(0, |m| m.mesh.num_nodes())
}

/// # Safety
/// `mesh` must be null or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn tdbem_mesh_free(mesh: *mut TdbemMesh) {
    if !mesh.is_null() {
        drop(Box::from_raw(mesh));
    }
}

/// Assemble and march on a copy of `mesh`.
///
/// `rhs_json` names the load, e.g. `{"kind":"PlaneWavePacket","k":[0.2,0.2,0.2]}`,
/// `{"kind":"RingdownG"}`, `{"kind":"RingdownH"}` or `{"kind":"Zero"}`.
///
/// # Safety
/// `mesh` must be a live handle, `rhs_json` a NUL-terminated string and
/// `out` valid storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn tdbem_solve(
    mesh: *const TdbemMesh,
    operator: TdbemOperator,
    rhs_json: *const c_char,
    dt: f64,
    n_steps: usize,
    out: *mut *mut TdbemSolution,
) -> TdbemStatus {
    guard(|| {
        let mesh = mesh.as_ref().ok_or_else(|| null("mesh"))?;
        if rhs_json.is_null() || out.is_null() {
            return Err(null("argument"));
        }
        let s = CStr::from_ptr(rhs_json)
            .to_str()
            .map_err(|_| (TdbemStatus::InvalidArgument, "rhs JSON is not UTF-8".to_string()))?;
        let rhs: RhsId = serde_json::from_str(s).map_err(|e| lib_err(e.into()))?;
        let op = match operator {
            TdbemOperator::SingleLayer => OperatorId::SingleLayer,
            TdbemOperator::Hypersingular => OperatorId::Hypersingular,
            TdbemOperator::Dtn => OperatorId::DtN,
        };
        let grid = TimeGrid::new(dt, n_steps).map_err(lib_err)?;
        let sol = solve_problem(
            mesh.mesh.clone(),
            grid,
            op,
            &rhs,
            &AssemblyOptions::default(),
            &StepSolverConfig::default(),
        )
        .map_err(lib_err)?;
        *out = Box::into_raw(Box::new(TdbemSolution { inner: sol }));
        Ok(())
    })
}

/// Number of steps and unknowns per step.
///
/// # Safety
/// `sol` must be a live handle; the output pointers may be null.
#[no_mangle]
pub unsafe extern "C" fn tdbem_solution_shape(
    sol: *const TdbemSolution,
    n_steps: *mut usize,
    size: *mut usize,
) -> TdbemStatus {
    guard(|| {
        let s = sol.as_ref().ok_or_else(|| null("solution"))?;
        if let Some(n) = n_steps.as_mut() {
            *n = s.inner.history.n_steps();
        }
        if let Some(n) = size.as_mut() {
            *n = s.inner.history.header.size;
        }
        Ok(())
    })
}

/// Copy the coefficients, step-major (`buf[(n - 1) * size + i]`).
///
/// # Safety
/// `sol` must be a live handle and `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn tdbem_solution_coefficients(
    sol: *const TdbemSolution,
    buf: *mut f64,
    len: usize,
) -> TdbemStatus {
    guard(|| {
        let s = sol.as_ref().ok_or_else(|| null("solution"))?;
        if buf.is_null() {
            return Err(null("buf"));
        }
        let h = &s.inner.history;
        let need = h.n_steps() * h.header.size;
        if len < need {
            return Err((TdbemStatus::BufferTooSmall, format!("need {need} doubles, got {len}")));
        }
        let dst = std::slice::from_raw_parts_mut(buf, need);
        for (chunk, row) in dst.chunks_mut(h.header.size.max(1)).zip(&h.coefficients) {
            chunk.copy_from_slice(row);
        }
        Ok(())
    })
}

/// Single layer potential at `n_points` points (`xyz` triples) and
/// `n_times` times; `out[p * n_times + t]`.
///
/// # Safety
/// `sol` must be a live handle, `points` must hold `3 n_points` doubles,
/// `times` `n_times` doubles and `out` `n_points n_times` doubles.
#[no_mangle]
pub unsafe extern "C" fn tdbem_evaluate_single_layer(
    sol: *const TdbemSolution,
    points: *const f64,
    n_points: usize,
    times: *const f64,
    n_times: usize,
    out: *mut f64,
) -> TdbemStatus {
    guard(|| {
        let s = sol.as_ref().ok_or_else(|| null("solution"))?;
        if points.is_null() || times.is_null() || out.is_null() {
            return Err(null("buffer"));
        }
        let pts: Vec<[f64; 3]> = std::slice::from_raw_parts(points, 3 * n_points)
            .chunks(3)
            .map(|c| [c[0], c[1], c[2]])
            .collect();
        let ts = std::slice::from_raw_parts(times, n_times);
        let probe = evaluate_single_layer(&s.inner.history, &s.inner.mesh, &pts, ts, &EvalOptions::default())
            .map_err(lib_err)?;
        let dst = std::slice::from_raw_parts_mut(out, n_points * n_times);
        for (chunk, row) in dst.chunks_mut(n_times.max(1)).zip(&probe.values) {
            chunk.copy_from_slice(row);
        }
        Ok(())
    })
}

/// # Safety
/// `sol` must be null or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn tdbem_solution_free(sol: *mut TdbemSolution) {
    if !sol.is_null() {
        drop(Box::from_raw(sol));
    }
}
