//! Scheduling policies and the sufficient-condition checks.
//!
//! Every policy maps `(SystemState, ConnectivityMatrix)` to a [`Schedule`]
//! for the current slot. Only FBS keeps state between slots (its frames).

mod conditions;
mod dwm;
mod fbs;
mod greedy;
mod perfect;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::sim::{ConnectivityMatrix, Schedule, SystemParams, SystemState};

pub use conditions::{mwf_condition_check, mwf_violations, opf_condition_check, opf_report, MwfViolation, OpfReport};
pub use dwm::{dwm_schedule, dwmn_schedule};
pub use fbs::{fbs_schedule, fbs_update_frames, FbsPolicy, Frame, FrameState};
pub use greedy::{dmws_schedule, hybrid_dwmn_mws_schedule, qmws_schedule, qssg_schedule};
pub use perfect::perfect_matching_schedule;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PolicyError {
    #[error("unknown policy `{0}`")]
    Unknown(String),
    #[error("malformed policy `{spec}`: {reason}")]
    Malformed { spec: String, reason: String },
    #[error("fbs needs a frame span h")]
    MissingFrameSpan,
    #[error("only fbs takes a frame span h")]
    UnexpectedFrameSpan,
    #[error("fbs frame capacity n - L*h = {n} - {l}*{h} must be at least 1")]
    FrameCapacity { n: usize, l: u32, h: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PolicyKind {
    Dwm,
    DwmN,
    DMws,
    HybridDwmnMws,
    Fbs,
    PerfectMatching,
    QSsg,
    QMws,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 8] = [
        PolicyKind::Dwm,
        PolicyKind::DwmN,
        PolicyKind::DMws,
        PolicyKind::HybridDwmnMws,
        PolicyKind::Fbs,
        PolicyKind::PerfectMatching,
        PolicyKind::QSsg,
        PolicyKind::QMws,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Dwm => "dwm",
            PolicyKind::DwmN => "dwm-n",
            PolicyKind::DMws => "d-mws",
            PolicyKind::HybridDwmnMws => "hybrid",
            PolicyKind::Fbs => "fbs",
            PolicyKind::PerfectMatching => "perfect-matching",
            PolicyKind::QSsg => "q-ssg",
            PolicyKind::QMws => "q-mws",
        }
    }

    fn from_name(name: &str) -> Option<Self> {
        let kind = match name.to_ascii_lowercase().as_str() {
            "dwm" => PolicyKind::Dwm,
            "dwm-n" | "dwmn" => PolicyKind::DwmN,
            "d-mws" | "dmws" => PolicyKind::DMws,
            "hybrid" | "dwm-n-mws" => PolicyKind::HybridDwmnMws,
            "fbs" => PolicyKind::Fbs,
            "perfect-matching" | "pm" => PolicyKind::PerfectMatching,
            "q-ssg" | "qssg" => PolicyKind::QSsg,
            "q-mws" | "qmws" => PolicyKind::QMws,
            _ => return None,
        };
        Some(kind)
    }

    /// Policies that serve the largest schedulable prefix of oldest packets.
    pub fn is_opf(self) -> bool {
        matches!(self, PolicyKind::Dwm | PolicyKind::DwmN | PolicyKind::HybridDwmnMws)
    }
}

/// A policy with its parameters, e.g. `fbs(h=2,analysis)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PolicySpec {
    pub kind: PolicyKind,
    pub fbs_h: Option<u32>,
    /// Tie-break versions of FBS and perfect-matching used for dominance.
    pub analysis_variant: bool,
}

impl PolicySpec {
    pub fn new(kind: PolicyKind) -> Self {
        Self { kind, fbs_h: None, analysis_variant: false }
    }

    pub fn fbs(h: u32, analysis_variant: bool) -> Self {
        Self { kind: PolicyKind::Fbs, fbs_h: Some(h), analysis_variant }
    }

    pub fn perfect_matching(analysis_variant: bool) -> Self {
        Self { kind: PolicyKind::PerfectMatching, fbs_h: None, analysis_variant }
    }

    pub fn validate(&self, params: &SystemParams) -> Result<(), PolicyError> {
        match (self.kind, self.fbs_h) {
            (PolicyKind::Fbs, None) => Err(PolicyError::MissingFrameSpan),
            (PolicyKind::Fbs, Some(h)) => {
                if params.n as u64 <= params.max_arrivals as u64 * h as u64 || h == 0 {
                    Err(PolicyError::FrameCapacity { n: params.n, l: params.max_arrivals, h })
                } else {
                    Ok(())
                }
            }
            (_, Some(_)) => Err(PolicyError::UnexpectedFrameSpan),
            (_, None) => Ok(()),
        }
    }

    pub fn build(&self, params: &SystemParams) -> Result<Box<dyn Policy>, PolicyError> {
        self.validate(params)?;
        let spec = *self;
        Ok(match self.kind {
            PolicyKind::Fbs => {
                let h = self.fbs_h.expect("validated");
                Box::new(FbsPolicy::new(params, h, self.analysis_variant))
            }
            _ => Box::new(Stateless { spec }),
        })
    }
}

impl fmt::Display for PolicySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.kind.name())?;
        let mut args = Vec::new();
        if let Some(h) = self.fbs_h {
            args.push(format!("h={h}"));
        }
        if self.analysis_variant {
            args.push("analysis".to_string());
        }
        if !args.is_empty() {
            write!(f, "({})", args.join(","))?;
        }
        Ok(())
    }
}

impl FromStr for PolicySpec {
    type Err = PolicyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let malformed = |reason: &str| PolicyError::Malformed { spec: s.to_string(), reason: reason.to_string() };
        let (name, args) = match s.find('(') {
            Some(open) => {
                let close = s.strip_suffix(')').ok_or_else(|| malformed("missing `)`"))?;
                (&s[..open], Some(&close[open + 1..]))
            }
            None => (s, None),
        };
        let kind = PolicyKind::from_name(name.trim()).ok_or_else(|| PolicyError::Unknown(name.trim().to_string()))?;
        let mut spec = PolicySpec::new(kind);
        for arg in args.into_iter().flat_map(|a| a.split(',')).map(str::trim).filter(|a| !a.is_empty()) {
            match arg.split_once('=') {
                Some(("h", v)) => {
                    spec.fbs_h = Some(v.trim().parse().map_err(|_| malformed("h must be a positive integer"))?)
                }
                None if arg == "analysis" => spec.analysis_variant = true,
                _ => return Err(malformed(&format!("unknown argument `{arg}`"))),
            }
        }
        if spec.analysis_variant && !matches!(kind, PolicyKind::Fbs | PolicyKind::PerfectMatching) {
            return Err(malformed("only fbs and perfect-matching have an analysis variant"));
        }
        match (kind, spec.fbs_h) {
            (PolicyKind::Fbs, None) => Err(PolicyError::MissingFrameSpan),
            (PolicyKind::Fbs, Some(_)) | (_, None) => Ok(spec),
            (_, Some(_)) => Err(PolicyError::UnexpectedFrameSpan),
        }
    }
}

/// Per-slot scheduling decision.
pub trait Policy: Send {
    fn spec(&self) -> PolicySpec;

    /// Called once per slot after arrivals; the returned schedule is
    /// assumed to be applied.
    fn schedule(&mut self, state: &SystemState, conn: &ConnectivityMatrix) -> Schedule;
}

struct Stateless {
    spec: PolicySpec,
}

impl Policy for Stateless {
    fn spec(&self) -> PolicySpec {
        self.spec
    }

    fn schedule(&mut self, state: &SystemState, conn: &ConnectivityMatrix) -> Schedule {
        match self.spec.kind {
            PolicyKind::Dwm => dwm_schedule(state, conn),
            PolicyKind::DwmN => dwmn_schedule(state, conn),
            PolicyKind::DMws => dmws_schedule(state, conn),
            PolicyKind::HybridDwmnMws => hybrid_dwmn_mws_schedule(state, conn),
            PolicyKind::PerfectMatching => perfect_matching_schedule(state, conn, self.spec.analysis_variant),
            PolicyKind::QSsg => qssg_schedule(state, conn),
            PolicyKind::QMws => qmws_schedule(state, conn),
            PolicyKind::Fbs => unreachable!("fbs is stateful"),
        }
    }
}
