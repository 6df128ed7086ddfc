//! Loss functions for the second-stage objective.
//!
//! A loss is described by `rho`, its (sub)derivative `psi` and, where it
//! exists, the second derivative `psi'`. Three losses are built in: absolute
//! error (CLAD), Huber-type winsorized loss (WME) and log-cosh (CLCE). Others
//! can be added through [`LossRegistry::register`], which checks the same
//! shape constraints the built-ins satisfy.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Default tuning constant for the winsorized loss.
pub const DEFAULT_WME_D: f64 = 1.35;

/// User-supplied loss. `psi_prime` may be left undefined for non-smooth losses.
pub trait CustomLoss<T: Scalar>: Send + Sync {
    fn rho(&self, x: T) -> T;
    fn psi(&self, x: T) -> T;
    fn psi_prime(&self, _x: T) -> Option<T> {
        None
    }
}

#[derive(Clone)]
enum Kind<T: Scalar> {
    Clad,
    Wme { d: T },
    LogCosh,
    Custom(Arc<dyn CustomLoss<T>>),
}

impl<T: Scalar> fmt::Debug for Kind<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Kind::Clad => write!(f, "Clad"),
            Kind::Wme { d } => write!(f, "Wme {{ d: {d} }}"),
            Kind::LogCosh => write!(f, "LogCosh"),
            Kind::Custom(_) => write!(f, "Custom"),
        }
    }
}

/// A loss together with the constants the asymptotic theory relies on.
#[derive(Debug, Clone)]
pub struct LossSpec<T: Scalar> {
    name: String,
    kind: Kind<T>,
    lipschitz_k: T,
    psi_bound: T,
    smooth: bool,
    params: Vec<(String, T)>,
}

/// `|x| + ln((1 + e^{-2|x|}) / 2)`, which never overflows.
#[inline]
fn log_cosh<T: Scalar>(x: T) -> T {
    let a = x.abs();
    if a < T::lit(1e-4) {
        let a2 = a * a;
        // x^2/2 - x^4/12 + x^6/45
        return a2 * (T::lit(0.5) - a2 * (T::lit(1.0 / 12.0) - a2 / T::lit(45.0)));
    }
    a + ((T::lit(-2.0) * a).exp_m1() * T::lit(0.5)).ln_1p()
}

#[inline]
fn sign<T: Scalar>(x: T) -> T {
    if x > T::zero() {
        T::one()
    } else if x < T::zero() {
        -T::one()
    } else {
        T::zero()
    }
}

impl<T: Scalar> LossSpec<T> {
    /// Absolute-error loss; `psi(0) = 0`.
    pub fn clad() -> Self {
        Self {
            name: "clad".into(),
            kind: Kind::Clad,
            lipschitz_k: T::one(),
            psi_bound: T::one(),
            smooth: false,
            params: Vec::new(),
        }
    }

    /// Huber-type loss, quadratic on `[-d, d]` and linear outside.
    pub fn wme(d: T) -> Result<Self> {
        if !(d > T::zero()) || !d.is_finite() {
            return Err(Error::InvalidParameter(format!("wme tuning constant must be positive, got {d}")));
        }
        Ok(Self {
            name: "wme".into(),
            kind: Kind::Wme { d },
            lipschitz_k: d,
            psi_bound: d,
            smooth: true,
            params: vec![("d".into(), d)],
        })
    }

    pub fn log_cosh() -> Self {
        Self {
            name: "logcosh".into(),
            kind: Kind::LogCosh,
            lipschitz_k: T::one(),
            psi_bound: T::one(),
            smooth: true,
            params: Vec::new(),
        }
    }

    /// Wraps a user loss after checking its shape constraints on a grid.
    pub fn custom(
        name: impl Into<String>,
        loss: Arc<dyn CustomLoss<T>>,
        lipschitz_k: T,
        psi_bound: T,
        smooth: bool,
        params: Vec<(String, T)>,
    ) -> Result<Self> {
        let spec = Self { name: name.into(), kind: Kind::Custom(loss), lipschitz_k, psi_bound, smooth, params };
        check_invariants(&spec)?;
        Ok(spec)
    }

    #[inline]
    pub fn rho(&self, x: T) -> T {
        match &self.kind {
            Kind::Clad => x.abs(),
            Kind::Wme { d } => {
                let a = x.abs();
                if a <= *d {
                    T::lit(0.5) * x * x
                } else {
                    *d * (a - T::lit(0.5) * *d)
                }
            }
            Kind::LogCosh => log_cosh(x),
            Kind::Custom(c) => c.rho(x),
        }
    }

    #[inline]
    pub fn psi(&self, x: T) -> T {
        match &self.kind {
            Kind::Clad => sign(x),
            Kind::Wme { d } => x.max(-*d).min(*d),
            Kind::LogCosh => x.tanh(),
            Kind::Custom(c) => c.psi(x),
        }
    }

    /// Classical second derivative, `None` where the loss has none (CLAD).
    #[inline]
    pub fn psi_prime(&self, x: T) -> Option<T> {
        match &self.kind {
            Kind::Clad => None,
            Kind::Wme { d } => Some(if x.abs() < *d { T::one() } else { T::zero() }),
            Kind::LogCosh => {
                let t = x.tanh();
                Some(T::one() - t * t)
            }
            Kind::Custom(c) => c.psi_prime(x),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn params(&self) -> &[(String, T)] {
        &self.params
    }

    /// Name plus parameters in the CLI syntax, e.g. `wme:d=1.35`.
    pub fn label(&self) -> String {
        if self.params.is_empty() {
            self.name.clone()
        } else {
            let ps: Vec<String> = self.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
            format!("{}:{}", self.name, ps.join(","))
        }
    }

    pub fn lipschitz_k(&self) -> T {
        self.lipschitz_k
    }

    pub fn psi_bound(&self) -> T {
        self.psi_bound
    }

    pub fn is_smooth(&self) -> bool {
        self.smooth
    }

    /// `psi'` for smooth losses, the central difference quotient of `psi` otherwise.
    #[inline]
    pub fn curvature(&self, x: T, h: T) -> T {
        if self.smooth {
            if let Some(v) = self.psi_prime(x) {
                return v;
            }
        }
        (self.psi(x + h) - self.psi(x - h)) / (h + h)
    }
}

/// Central difference quotient `x -> (psi(x+h) - psi(x-h)) / 2h`.
///
/// For losses without a classical `psi'` (CLAD) this spreads the jump of
/// `psi` over a window of width `2h`.
pub fn smoothed_psi_prime<T: Scalar>(loss: &LossSpec<T>, h: T) -> Result<impl Fn(T) -> T + '_> {
    if !(h > T::zero()) {
        return Err(Error::InvalidParameter(format!("bandwidth must be positive, got {h}")));
    }
    Ok(move |x: T| (loss.psi(x + h) - loss.psi(x - h)) / (h + h))
}

/// Grid used by the invariant checks: 10^4 + 1 points on [-50, 50].
fn check_grid<T: Scalar>() -> Vec<T> {
    const STEPS: usize = 10_000;
    (0..=STEPS).map(|i| T::lit(-50.0 + 100.0 * i as f64 / STEPS as f64)).collect()
}

/// Checks `rho(0) = 0`, evenness, non-negativity, the Lipschitz bound, the
/// `psi` bound and monotone `psi` on a sampled grid.
pub fn check_invariants<T: Scalar>(loss: &LossSpec<T>) -> Result<()> {
    let fail = |property: &'static str, detail: String| Error::LossInvariant {
        name: loss.name().to_string(),
        property,
        detail,
    };
    if !(loss.lipschitz_k > T::zero()) || !(loss.psi_bound > T::zero()) {
        return Err(fail("positivity", "lipschitz_k and psi_bound must be positive".into()));
    }
    if loss.rho(T::zero()) != T::zero() {
        return Err(fail("rho(0) = 0", format!("rho(0) = {}", loss.rho(T::zero()))));
    }
    let grid = check_grid::<T>();
    // rounding allowance; f32 needs more than f64
    let slack = T::lit(1e-9).max(T::default_epsilon() * T::lit(64.0));
    let mut prev: Option<(T, T, T)> = None;
    for &x in &grid {
        let r = loss.rho(x);
        let p = loss.psi(x);
        if !r.is_finite() || !p.is_finite() {
            return Err(fail("finiteness", format!("non-finite value at x = {x}")));
        }
        if r < T::zero() {
            return Err(fail("rho >= 0", format!("rho({x}) = {r}")));
        }
        if (r - loss.rho(-x)).abs() > slack * (T::one() + r.abs()) {
            return Err(fail("symmetry", format!("rho({x}) != rho(-{x})")));
        }
        if p.abs() > loss.psi_bound * (T::one() + slack) {
            return Err(fail("psi bound", format!("|psi({x})| = {} > {}", p.abs(), loss.psi_bound)));
        }
        if let Some((px, pr, pp)) = prev {
            if (r - pr).abs() > loss.lipschitz_k * (x - px) * (T::one() + slack) + slack * (T::one() + r.abs()) {
                return Err(fail("Lipschitz", format!("|rho({x}) - rho({px})| exceeds k |x - y|")));
            }
            if p < pp - slack {
                return Err(fail("monotone psi", format!("psi({x}) < psi({px})")));
            }
        }
        prev = Some((x, r, p));
    }
    // Long-range pairs catch violations hidden by fine grid steps.
    for (i, &x) in grid.iter().enumerate().step_by(97) {
        let y = grid[grid.len() - 1 - i];
        let (rx, ry) = (loss.rho(x), loss.rho(y));
        if (rx - ry).abs() > loss.lipschitz_k * (x - y).abs() * (T::one() + slack) + slack * (T::one() + rx.abs()) {
            return Err(fail("Lipschitz", format!("|rho({x}) - rho({y})| exceeds k |x - y|")));
        }
    }
    Ok(())
}

type Factory<T> = Arc<dyn Fn(&BTreeMap<String, T>) -> Result<LossSpec<T>> + Send + Sync>;

/// Name-indexed collection of losses, parsed from strings such as `wme:d=1.35`.
#[derive(Clone)]
pub struct LossRegistry<T: Scalar> {
    factories: BTreeMap<String, Factory<T>>,
}

impl<T: Scalar> Default for LossRegistry<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> LossRegistry<T> {
    /// Registry pre-populated with `clad`, `wme` and `logcosh`.
    pub fn new() -> Self {
        let mut factories: BTreeMap<String, Factory<T>> = BTreeMap::new();
        factories.insert("clad".into(), Arc::new(|p| no_params("clad", p).map(|_| LossSpec::clad())));
        factories.insert("logcosh".into(), Arc::new(|p| no_params("logcosh", p).map(|_| LossSpec::log_cosh())));
        factories.insert(
            "wme".into(),
            Arc::new(|p: &BTreeMap<String, T>| {
                if let Some(k) = p.keys().find(|k| k.as_str() != "d") {
                    return Err(Error::InvalidParameter(format!("wme: unknown parameter `{k}`")));
                }
                LossSpec::wme(p.get("d").copied().unwrap_or_else(|| T::lit(DEFAULT_WME_D)))
            }),
        );
        Self { factories }
    }

    /// Adds a fixed loss under its own name after validating it.
    pub fn register(&mut self, spec: LossSpec<T>) -> Result<()> {
        check_invariants(&spec)?;
        let name = spec.name().to_string();
        self.factories.insert(
            name.clone(),
            Arc::new(move |p| no_params(&name, p).map(|_| spec.clone())),
        );
        Ok(())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }

    /// Parses `name` or `name:key=value[,key=value...]`.
    pub fn parse(&self, s: &str) -> Result<LossSpec<T>> {
        let (name, rest) = match s.split_once(':') {
            Some((n, r)) => (n.trim(), Some(r)),
            None => (s.trim(), None),
        };
        let factory = self.factories.get(name).ok_or_else(|| Error::UnknownLoss(name.to_string()))?;
        let mut params = BTreeMap::new();
        if let Some(rest) = rest {
            for kv in rest.split(',').filter(|kv| !kv.trim().is_empty()) {
                let (k, v) = kv
                    .split_once('=')
                    .ok_or_else(|| Error::InvalidParameter(format!("expected key=value, got `{kv}`")))?;
                let v: f64 = v
                    .trim()
                    .parse()
                    .map_err(|_| Error::InvalidParameter(format!("`{v}` is not a number")))?;
                params.insert(k.trim().to_string(), T::lit(v));
            }
        }
        factory(&params)
    }
}

fn no_params<T>(name: &str, p: &BTreeMap<String, T>) -> Result<()> {
    match p.keys().next() {
        Some(k) => Err(Error::InvalidParameter(format!("{name}: unexpected parameter `{k}`"))),
        None => Ok(()),
    }
}
