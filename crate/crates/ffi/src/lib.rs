//! C interface to the `semianon` library.
//!
//! Games and kernels are opaque heap handles, created by the
//! `semianon_game_*` constructors and `semianon_kernel_build` and released
//! with the matching `*_free`. Every fallible call
//! returns a [`SemianonStatus`]; on failure the message is available from
//! [`semianon_last_error`] on the same thread until the next failing call.
//! Results go through out-pointers, and array outputs take a caller buffer
//! with its length.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use semianon::analysis::{calibrate_beta, evolve};
use semianon::bounds::beta_lower_bound;
use semianon::game::{catalog, GameSpec, StateSpace};
use semianon::kernel::{stationary_closed_form, stationary_numeric, Distribution, Dynamic, Kernel};
use semianon::scenario::Scenario;
use semianon::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SemianonStatus {
    Ok = 0,
    NullPointer = 1,
    /// Bad argument, game or state.
    InvalidArgument = 2,
    /// Scenario text could not be parsed or validated.
    Config = 3,
    /// State space or series truncation above its cap.
    TooLarge = 4,
    /// Iteration did not converge or a target is unreachable.
    Numerical = 5,
    /// The output buffer is shorter than required; the needed length is
    /// still written where the call has a length out-pointer.
    BufferTooSmall = 6,
    /// A Rust panic was caught at the boundary.
    Panic = 7,
}

/// Values accepted by the `dynamic` parameters.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SemianonDynamic {
    /// Population-local clocks (rate `alpha n / z` within the population).
    Modified = 0,
    /// Standard log-linear learning (every agent at rate 1).
    Standard = 1,
    /// Clocks divided by the cross-population count at the resource.
    Prior = 2,
}

/// Opaque game handle.
pub struct SemianonGame {
    game: GameSpec,
}

/// Opaque kernel handle; owns its state space.
pub struct SemianonKernel {
    kernel: Kernel,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> SemianonStatus {
    match e {
        Error::Config { .. } | Error::Io(_) => SemianonStatus::Config,
        Error::CardinalityExceeded { .. } | Error::TruncationOverflow { .. } => {
            SemianonStatus::TooLarge
        }
        Error::NotConverged { .. }
        | Error::NotMixed { .. }
        | Error::Infeasible { .. }
        | Error::Unreachable { .. } => SemianonStatus::Numerical,
        _ => SemianonStatus::InvalidArgument,
    }
}

enum Failure {
    Lib(Error),
    Status(SemianonStatus, String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn fail(status: SemianonStatus, message: impl Into<String>) -> Failure {
    Failure::Status(status, message.into())
}

/// Run `f`, catching panics and recording the error message.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SemianonStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SemianonStatus::Ok,
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Failure::Status(s, m))) => {
            set_error(m);
            s
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            SemianonStatus::Panic
        }
    }
}

fn dynamic_of(value: i32) -> Result<Dynamic, Failure> {
    match value {
        0 => Ok(Dynamic::Mlll),
        1 => Ok(Dynamic::Lll),
        2 => Ok(Dynamic::Prior),
        v => Err(fail(
            SemianonStatus::InvalidArgument,
            format!("unknown dynamic {v}; expected 0, 1 or 2"),
        )),
    }
}

unsafe fn get<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| fail(SemianonStatus::NullPointer, format!("{name} is null")))
}

unsafe fn out<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut()
        .ok_or_else(|| fail(SemianonStatus::NullPointer, format!("{name} is null")))
}

unsafe fn slice<'a>(p: *const f64, len: usize, name: &str) -> Result<&'a [f64], Failure> {
    if p.is_null() {
        return Err(fail(SemianonStatus::NullPointer, format!("{name} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn write_array(src: &[f64], dst: *mut f64, len: usize) -> Result<(), Failure> {
    if dst.is_null() {
        return Err(fail(SemianonStatus::NullPointer, "output buffer is null"));
    }
    if len < src.len() {
        return Err(fail(
            SemianonStatus::BufferTooSmall,
            format!("buffer holds {len} values, {} needed", src.len()),
        ));
    }
    std::slice::from_raw_parts_mut(dst, src.len()).copy_from_slice(src);
    Ok(())
}

fn boxed<T>(value: T) -> *mut T {
    Box::into_raw(Box::new(value))
}

/// Library version, a static nul-terminated string.
#[no_mangle]
pub extern "C" fn semianon_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failing call on this thread (empty if none). The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn semianon_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Build the game described by a scenario (TOML text). An unset `beta` in
/// the scenario means zero.
///
/// # Safety
/// `toml` must be a nul-terminated string and `game` a valid out-pointer.
#[no_mangle]
pub unsafe extern "C" fn semianon_game_from_scenario(
    toml: *const c_char,
    game: *mut *mut SemianonGame,
) -> SemianonStatus {
    guard(|| {
        let slot = out(game, "game")?;
        *slot = ptr::null_mut();
        if toml.is_null() {
            return Err(fail(SemianonStatus::NullPointer, "toml is null"));
        }
        let text = CStr::from_ptr(toml).to_str().map_err(|e| {
            fail(
                SemianonStatus::InvalidArgument,
                format!("toml is not UTF-8: {e}"),
            )
        })?;
        let g = Scenario::parse(text)?.game()?;
        *slot = boxed(SemianonGame { game: g });
        Ok(())
    })
}

/// The three-population congestion game: populations of `n1`, `n2`, `n3`
/// agents, the third contributing no welfare.
///
/// # Safety
/// `game` must be a valid out-pointer.
#[no_mangle]
pub unsafe extern "C" fn semianon_game_congestion3(
    n1: u32,
    n2: u32,
    n3: u32,
    alpha: f64,
    beta: f64,
    game: *mut *mut SemianonGame,
) -> SemianonStatus {
    guard(|| {
        let slot = out(game, "game")?;
        *slot = ptr::null_mut();
        let g = catalog::example3(n1, n2, n3, alpha, beta)?;
        *slot = boxed(SemianonGame { game: g });
        Ok(())
    })
}

/// Copy of `game` at another rationality.
///
/// # Safety
/// `game` must be a live handle and `result` a valid out-pointer.
#[no_mangle]
pub unsafe extern "C" fn semianon_game_with_beta(
    game: *const SemianonGame,
    beta: f64,
    result: *mut *mut SemianonGame,
) -> SemianonStatus {
    guard(|| {
        let slot = out(result, "result")?;
        *slot = ptr::null_mut();
        let g = get(game, "game")?.game.with_beta(beta)?;
        *slot = boxed(SemianonGame { game: g });
        Ok(())
    })
}

/// Total agents, populations and the game's rationality.
///
/// # Safety
/// `game` must be a live handle; any out-pointer may be null to skip it.
#[no_mangle]
pub unsafe extern "C" fn semianon_game_info(
    game: *const SemianonGame,
    agents: *mut u32,
    populations: *mut usize,
    beta: *mut f64,
) -> SemianonStatus {
    guard(|| {
        let g = &get(game, "game")?.game;
        if let Some(a) = agents.as_mut() {
            *a = g.n();
        }
        if let Some(m) = populations.as_mut() {
            *m = g.m();
        }
        if let Some(b) = beta.as_mut() {
            *b = g.beta();
        }
        Ok(())
    })
}

/// Release a game; null is ignored.
///
/// # Safety
/// `game` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn semianon_game_free(game: *mut SemianonGame) {
    if !game.is_null() {
        drop(Box::from_raw(game));
    }
}

/// Smallest rationality whose stationary expected potential reaches
/// `fraction` of the maximum under `dynamic`.
///
/// # Safety
/// `game` must be a live handle and `beta` a valid out-pointer.
#[no_mangle]
pub unsafe extern "C" fn semianon_calibrate_beta(
    game: *const SemianonGame,
    dynamic: i32,
    fraction: f64,
    beta: *mut f64,
) -> SemianonStatus {
    guard(|| {
        let slot = out(beta, "beta")?;
        let g = &get(game, "game")?.game;
        *slot = calibrate_beta(g, dynamic_of(dynamic)?, fraction)?.beta;
        Ok(())
    })
}

/// Rationality sufficient for expected potential within `eps` of the
/// maximum, for `m` populations, `s` actions and Lipschitz constant `lambda`.
///
/// # Safety
/// `beta` must be a valid out-pointer.
#[no_mangle]
pub unsafe extern "C" fn semianon_beta_lower_bound(
    m: usize,
    s: usize,
    lambda: f64,
    eps: f64,
    beta: *mut f64,
) -> SemianonStatus {
    guard(|| {
        let slot = out(beta, "beta")?;
        if m == 0 || s < 2 || !(eps > 0.0 && eps < 1.0) || !(lambda >= 0.0) {
            return Err(fail(
                SemianonStatus::InvalidArgument,
                format!("need m >= 1, s >= 2, lambda >= 0, eps in (0,1); got m={m} s={s} lambda={lambda} eps={eps}"),
            ));
        }
        *slot = beta_lower_bound(m, s, lambda, eps);
        Ok(())
    })
}

/// Enumerate the game's states and build its one-step kernel.
///
/// # Safety
/// `game` must be a live handle and `kernel` a valid out-pointer.
#[no_mangle]
pub unsafe extern "C" fn semianon_kernel_build(
    game: *const SemianonGame,
    dynamic: i32,
    kernel: *mut *mut SemianonKernel,
) -> SemianonStatus {
    guard(|| {
        let slot = out(kernel, "kernel")?;
        *slot = ptr::null_mut();
        let g = &get(game, "game")?.game;
        let space = Arc::new(StateSpace::enumerate(g)?);
        let k = Kernel::build(g, space, dynamic_of(dynamic)?)?;
        *slot = boxed(SemianonKernel { kernel: k });
        Ok(())
    })
}

/// Release a kernel; null is ignored.
///
/// # Safety
/// `kernel` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn semianon_kernel_free(kernel: *mut SemianonKernel) {
    if !kernel.is_null() {
        drop(Box::from_raw(kernel));
    }
}

/// Number of states, and the clock rate converting uniformized ticks to time.
///
/// # Safety
/// `kernel` must be a live handle; out-pointers may be null to skip them.
#[no_mangle]
pub unsafe extern "C" fn semianon_kernel_info(
    kernel: *const SemianonKernel,
    states: *mut usize,
    global_rate: *mut f64,
) -> SemianonStatus {
    guard(|| {
        let k = &get(kernel, "kernel")?.kernel;
        if let Some(s) = states.as_mut() {
            *s = k.len();
        }
        if let Some(r) = global_rate.as_mut() {
            *r = k.global_rate();
        }
        Ok(())
    })
}

/// One-step transition probability between state indices.
///
/// # Safety
/// `kernel` must be a live handle and `value` a valid out-pointer.
#[no_mangle]
pub unsafe extern "C" fn semianon_kernel_entry(
    kernel: *const SemianonKernel,
    from: usize,
    to: usize,
    value: *mut f64,
) -> SemianonStatus {
    guard(|| {
        let slot = out(value, "value")?;
        let k = &get(kernel, "kernel")?.kernel;
        if from >= k.len() || to >= k.len() {
            return Err(fail(
                SemianonStatus::InvalidArgument,
                format!("index out of range for {} states", k.len()),
            ));
        }
        *slot = k.get(from, to);
        Ok(())
    })
}

/// Potential of every state, in state order.
///
/// # Safety
/// `kernel` must be a live handle and `values` hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn semianon_kernel_potentials(
    kernel: *const SemianonKernel,
    values: *mut f64,
    len: usize,
) -> SemianonStatus {
    guard(|| {
        let k = &get(kernel, "kernel")?.kernel;
        write_array(k.space().potentials(), values, len)
    })
}

/// Flat action counts of state `index` (population-major) into `counts`;
/// `needed` receives the count length.
///
/// # Safety
/// `kernel` must be a live handle, `counts` hold `len` values and `needed`
/// be null or a valid out-pointer.
#[no_mangle]
pub unsafe extern "C" fn semianon_kernel_state(
    kernel: *const SemianonKernel,
    index: usize,
    counts: *mut u32,
    len: usize,
    needed: *mut usize,
) -> SemianonStatus {
    guard(|| {
        let k = &get(kernel, "kernel")?.kernel;
        if index >= k.len() {
            return Err(fail(
                SemianonStatus::InvalidArgument,
                format!("index {index} out of range for {} states", k.len()),
            ));
        }
        let c = k.space().counts(index);
        if let Some(n) = needed.as_mut() {
            *n = c.len();
        }
        if counts.is_null() {
            return Err(fail(SemianonStatus::NullPointer, "counts is null"));
        }
        if len < c.len() {
            return Err(fail(
                SemianonStatus::BufferTooSmall,
                format!("buffer holds {len} counts, {} needed", c.len()),
            ));
        }
        std::slice::from_raw_parts_mut(counts, c.len()).copy_from_slice(c);
        Ok(())
    })
}

/// Stationary distribution: closed form for the modified and standard
/// dynamics, a numerical solve for the prior one.
///
/// # Safety
/// `kernel` must be a live handle and `probs` hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn semianon_kernel_stationary(
    kernel: *const SemianonKernel,
    probs: *mut f64,
    len: usize,
) -> SemianonStatus {
    guard(|| {
        let k = &get(kernel, "kernel")?.kernel;
        let pi = match k.dynamic() {
            Dynamic::Prior => stationary_numeric(k)?,
            d => stationary_closed_form(k.space(), k.beta(), d)?,
        };
        write_array(pi.probs(), probs, len)
    })
}

/// Distribution after `ticks` uniformized clock ticks from `initial`
/// (continuous time `ticks / global_rate`). `initial` and `result` both
/// hold `len` doubles, which must equal the state count; they may alias.
///
/// # Safety
/// `kernel` must be a live handle and both arrays hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn semianon_kernel_evolve(
    kernel: *const SemianonKernel,
    initial: *const f64,
    ticks: f64,
    result: *mut f64,
    len: usize,
) -> SemianonStatus {
    guard(|| {
        let k = &get(kernel, "kernel")?.kernel;
        if len != k.len() {
            return Err(fail(
                SemianonStatus::InvalidArgument,
                format!("length {len} differs from the {} states", k.len()),
            ));
        }
        let mu0 = Distribution::new(slice(initial, len, "initial")?.to_vec())?;
        let mu = evolve(k, &mu0, ticks)?;
        write_array(mu.probs(), result, len)
    })
}
