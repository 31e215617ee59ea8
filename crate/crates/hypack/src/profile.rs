//! Parameter profiles: every constant of the pipeline in one `key = value` file.

use serde::{Deserialize, Serialize};

use crate::absorb::AbsorbParams;
use crate::cover::{CoverGates, FamilyOpts};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Profile {
    /// Coverage slack of the path collections handed to a layer.
    pub mu: f64,
    /// Drop probability of each path in the random good subset.
    pub delta: f64,
    /// Reservoir size parameter.
    pub beta: f64,
    pub theta: f64,
    pub ell0: usize,
    pub ell1: usize,
    /// Path length of the global cover.
    pub l: usize,
    /// Cycle length of the in-layer cover; 0 picks the largest divisor of `|V3|` up to `l_prime_max`.
    pub l_prime: usize,
    pub l_prime_max: usize,
    pub absorb_l: usize,
    pub absorb_a: usize,
    pub absorb_ell: usize,
    pub absorb_coverage: f64,
    pub absorb_retries: usize,
    /// Number of in-layer collections one is drawn from.
    pub cover_r: usize,
    pub mu_prime: f64,
    pub cap_con: f64,
    pub cap_end: f64,
    pub cover_retries: usize,
    pub family_limit: usize,
    pub family_per_edge: usize,
    pub family_budget: usize,
    /// Target girth must be at least `girth_mult · l`.
    pub girth_mult: f64,
    pub layer_retries: usize,
    pub good_retries: usize,
    pub good_eta: f64,
    pub good_rho: f64,
    pub rho_slack: f64,
    pub reservoir_retries: usize,
    pub audit_pairs: usize,
    /// Audit threshold factor on `(|R|)_ℓ`; defaults to `beta` when absent.
    pub audit_factor: Option<f64>,
    pub cap_fraction: f64,
    pub min_codegree: usize,
    /// Keep probability scale for the reserve graph F.
    pub reserve: f64,
    pub reserve_eta_min: Option<f64>,
    pub reserve_rho_max: Option<f64>,
    pub sparsify_retries: usize,
}

impl Default for Profile {
    fn default() -> Self {
        Self {
            mu: 0.2,
            delta: 0.3,
            beta: 0.4,
            theta: 0.5,
            ell0: 2,
            ell1: 6,
            l: 6,
            l_prime: 0,
            l_prime_max: 12,
            absorb_l: 12,
            absorb_a: 2,
            absorb_ell: 1,
            absorb_coverage: 3.0,
            absorb_retries: 20,
            cover_r: 3,
            mu_prime: 0.2,
            cap_con: 1.0,
            cap_end: 1.0,
            cover_retries: 10,
            family_limit: 20_000,
            family_per_edge: 8,
            family_budget: 4_000,
            girth_mult: 2.0,
            layer_retries: 20,
            good_retries: 200,
            good_eta: 0.5,
            good_rho: 2.0,
            rho_slack: 0.1,
            reservoir_retries: 20,
            audit_pairs: 50,
            audit_factor: None,
            cap_fraction: 0.25,
            min_codegree: 1,
            reserve: 0.6,
            reserve_eta_min: None,
            reserve_rho_max: None,
            sparsify_retries: 20,
        }
    }
}

impl Profile {
    /// Parse `key = value` lines; `#` starts a comment. Missing keys keep their defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let p: Profile = toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| text[..s.start].matches('\n').count() + 1).unwrap_or(0);
            Error::Parse { line, msg: e.message().to_string() }
        })?;
        p.validate()?;
        Ok(p)
    }

    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("flat profile")
    }

    /// Override one field from a `key=value` string.
    pub fn set(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Param(format!("expected key=value, got {assignment:?}")))?;
        let mut one: toml::Table = toml::from_str(&format!("v = {}", value.trim()))
            .map_err(|e| Error::Param(format!("{}: {}", key.trim(), e.message())))?;
        let mut table: toml::Table = toml::from_str(&self.to_text()).expect("own output parses");
        table.insert(key.trim().to_string(), one.remove("v").expect("single key"));
        let p: Profile = table.try_into().map_err(|e: toml::de::Error| Error::Param(e.message().to_string()))?;
        p.validate()?;
        *self = p;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if !(unit(self.mu) && unit(self.delta) && unit(self.beta) && unit(self.theta) && unit(self.mu_prime)) {
            return Err(Error::Param("mu, delta, beta, theta, mu_prime must lie in [0, 1]".into()));
        }
        if self.ell0 == 0 || self.ell0 > self.ell1 {
            return Err(Error::Param(format!("need 1 <= ell0 <= ell1, got {} and {}", self.ell0, self.ell1)));
        }
        if !unit(self.reserve) {
            return Err(Error::Param("reserve must lie in [0, 1]".into()));
        }
        Ok(())
    }

    pub fn absorb_params(&self) -> AbsorbParams {
        AbsorbParams {
            l: self.absorb_l,
            a: self.absorb_a,
            ell: self.absorb_ell,
            theta: self.theta,
            t_star: None,
            retries: self.absorb_retries,
            rho_slack: self.rho_slack,
            coverage: self.absorb_coverage,
        }
    }

    /// Gates for the global cover.
    pub fn cover_gates(&self) -> CoverGates {
        CoverGates { mu: self.mu, cap_con: self.cap_con, cap_end: self.cap_end, retries: self.cover_retries }
    }

    /// Gates for the in-layer cover.
    pub fn layer_cover_gates(&self) -> CoverGates {
        CoverGates { mu: self.mu_prime, ..self.cover_gates() }
    }

    pub fn family(&self, seed: u64) -> FamilyOpts {
        FamilyOpts { limit: self.family_limit, per_edge: self.family_per_edge, budget: self.family_budget, seed }
    }

    pub fn audit_factor(&self) -> f64 {
        self.audit_factor.unwrap_or(self.beta)
    }
}
