//! Segment-wise heating model for a bar passing through induction coils.
//!
//! A bar is split into segments of equal length and uniform temperature with
//! no axial conduction between them. Each segment absorbs a share of the coil
//! power scaled by an empirical transfer efficiency and loses heat by free
//! convection and radiation. Temperatures are in °C throughout; the Kelvin
//! offset appears only inside the radiative term.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Stefan-Boltzmann constant, W/(m²·K⁴).
pub const STEFAN_BOLTZMANN: f64 = 5.670374419e-8;

/// Celsius to Kelvin offset used by the radiative term (the model uses 273, not 273.15).
pub const KELVIN_OFFSET: f64 = 273.0;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid physics parameter `{field}`: {reason}")]
pub struct InvalidParams {
    pub field: &'static str,
    pub reason: String,
}

fn invalid(field: &'static str, reason: impl Into<String>) -> InvalidParams {
    InvalidParams {
        field,
        reason: reason.into(),
    }
}

/// Thermal and geometric properties of the bar material.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MaterialParams {
    /// J/(kg·°C)
    pub specific_heat: f64,
    pub emissivity: f64,
    /// °C
    pub curie_temp: f64,
    /// Coil-to-bar transfer efficiency below the Curie point.
    pub k_below: f64,
    /// Transfer efficiency at and above the Curie point.
    pub k_above: f64,
    /// Mass of a whole bar, kg.
    pub bar_mass: f64,
    /// m
    pub bar_diameter: f64,
}

impl Default for MaterialParams {
    fn default() -> Self {
        Self {
            specific_heat: 650.0,
            emissivity: 0.15,
            curie_temp: 800.0,
            k_below: 0.90,
            k_above: 0.20,
            // 4 m of 0.13 m round steel at 7850 kg/m³.
            bar_mass: 417.0,
            bar_diameter: 0.13,
        }
    }
}

impl MaterialParams {
    pub fn validate(&self) -> Result<(), InvalidParams> {
        if !(self.specific_heat > 0.0 && self.specific_heat.is_finite()) {
            return Err(invalid("specific_heat", "must be positive"));
        }
        if !(0.0..=1.0).contains(&self.emissivity) {
            return Err(invalid("emissivity", "must lie in [0, 1]"));
        }
        if !self.curie_temp.is_finite() {
            return Err(invalid("curie_temp", "must be finite"));
        }
        if !(self.k_below > 0.0 && self.k_below <= 1.0) {
            return Err(invalid("k_below", "must lie in (0, 1]"));
        }
        if !(self.k_above > 0.0 && self.k_above <= self.k_below) {
            return Err(invalid("k_above", "must lie in (0, k_below]"));
        }
        if !(self.bar_mass > 0.0 && self.bar_mass.is_finite()) {
            return Err(invalid("bar_mass", "must be positive"));
        }
        if !(self.bar_diameter > 0.0 && self.bar_diameter.is_finite()) {
            return Err(invalid("bar_diameter", "must be positive"));
        }
        Ok(())
    }
}

/// Surroundings of the line and the empirical free-convection law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Environment {
    /// °C
    pub ambient_temp: f64,
    pub stefan_boltzmann: f64,
    /// W/(m²·°C^exponent)
    pub convective_coefficient: f64,
    pub convective_exponent: f64,
}

impl Default for Environment {
    fn default() -> Self {
        Self {
            ambient_temp: 20.0,
            stefan_boltzmann: STEFAN_BOLTZMANN,
            convective_coefficient: 1.86,
            convective_exponent: 1.3,
        }
    }
}

impl Environment {
    pub fn validate(&self) -> Result<(), InvalidParams> {
        if !self.ambient_temp.is_finite() {
            return Err(invalid("ambient_temp", "must be finite"));
        }
        if !(self.stefan_boltzmann > 0.0) {
            return Err(invalid("stefan_boltzmann", "must be positive"));
        }
        if !(self.convective_coefficient >= 0.0) {
            return Err(invalid("convective_coefficient", "must be non-negative"));
        }
        if !(self.convective_exponent > 0.0) {
            return Err(invalid("convective_exponent", "must be positive"));
        }
        Ok(())
    }
}

/// One bar segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    /// °C
    pub temperature: f64,
    /// m
    pub length: f64,
    /// kg
    pub mass: f64,
}

/// Efficiency with which coil power is absorbed; the above-Curie value applies at exactly `curie_temp`.
pub fn transfer_efficiency(temperature: f64, mat: &MaterialParams) -> f64 {
    if temperature < mat.curie_temp {
        mat.k_below
    } else {
        mat.k_above
    }
}

fn lateral_area(diameter: f64, length: f64) -> f64 {
    PI * diameter * length
}

/// Free-convection loss of a segment in W. Zero when the segment is not above ambient.
pub fn convective_loss(temperature: f64, amb: &Environment, diameter: f64, length: f64) -> f64 {
    let excess = temperature - amb.ambient_temp;
    if excess <= 0.0 {
        return 0.0;
    }
    lateral_area(diameter, length)
        * amb.convective_coefficient
        * excess.powf(amb.convective_exponent)
}

/// Radiative loss of a segment in W: the grey-body flux times the lateral surface area.
pub fn radiative_loss(
    temperature: f64,
    amb: &Environment,
    mat: &MaterialParams,
    diameter: f64,
    length: f64,
) -> f64 {
    if temperature <= amb.ambient_temp {
        return 0.0;
    }
    let hot = (temperature + KELVIN_OFFSET).powi(4);
    let cold = (amb.ambient_temp + KELVIN_OFFSET).powi(4);
    lateral_area(diameter, length) * amb.stefan_boltzmann * mat.emissivity * (hot - cold)
}

/// Net power into a segment, W.
pub fn net_power(
    seg: &Segment,
    coil_power_share: f64,
    mat: &MaterialParams,
    amb: &Environment,
) -> f64 {
    let t = seg.temperature;
    transfer_efficiency(t, mat) * coil_power_share
        - convective_loss(t, amb, mat.bar_diameter, seg.length)
        - radiative_loss(t, amb, mat, mat.bar_diameter, seg.length)
}

/// Advances one segment by `dt` seconds with explicit Euler, never letting it
/// drop below ambient.
pub fn step_segment(
    seg: Segment,
    coil_power_share: f64,
    mat: &MaterialParams,
    amb: &Environment,
    dt: f64,
) -> Segment {
    debug_assert!(dt > 0.0);
    debug_assert!(coil_power_share >= 0.0);
    let p_tot = net_power(&seg, coil_power_share, mat, amb);
    let heated = seg.temperature + p_tot * dt / (seg.mass * mat.specific_heat);
    Segment {
        temperature: heated.max(amb.ambient_temp),
        ..seg
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat() -> MaterialParams {
        MaterialParams {
            emissivity: 0.8,
            bar_diameter: 0.1,
            ..MaterialParams::default()
        }
    }

    #[test]
    fn efficiency_steps_at_curie_point() {
        let m = mat();
        assert_eq!(transfer_efficiency(500.0, &m), 0.90);
        assert_eq!(transfer_efficiency(900.0, &m), 0.20);
        assert_eq!(transfer_efficiency(800.0, &m), 0.20);
    }

    #[test]
    fn losses_vanish_at_ambient() {
        let m = mat();
        let a = Environment::default();
        assert_eq!(convective_loss(20.0, &a, 0.1, 0.1), 0.0);
        assert_eq!(radiative_loss(20.0, &a, &m, 0.1, 0.1), 0.0);
        assert_eq!(convective_loss(-5.0, &a, 0.1, 0.1), 0.0);
    }

    #[test]
    fn reference_loss_values() {
        // Independent scalar evaluation of both loss laws at 1000 °C.
        let a = Environment::default();
        let conv = std::f64::consts::PI * 0.1 * 0.1 * 1.86 * 980f64.powf(1.3);
        let rad = std::f64::consts::PI
            * 0.1
            * 0.1
            * 5.670374419e-8
            * 0.8
            * (1273f64.powi(4) - 293f64.powi(4));
        assert!((convective_loss(1000.0, &a, 0.1, 0.1) - conv).abs() < 1e-9 * conv);
        assert!((radiative_loss(1000.0, &a, &mat(), 0.1, 0.1) - rad).abs() < 1e-9 * rad);
        assert!((conv - 452.0).abs() < 1.0, "conv = {conv}");
        assert!((rad - 3730.0).abs() < 10.0, "rad = {rad}");
    }

    #[test]
    fn convective_loss_linear_in_length() {
        let a = Environment::default();
        let one = convective_loss(700.0, &a, 0.1, 0.1);
        let two = convective_loss(700.0, &a, 0.1, 0.2);
        assert!((two - 2.0 * one).abs() < 1e-12 * two);
    }

    #[test]
    fn idle_segment_at_ambient_is_unchanged() {
        let seg = Segment {
            temperature: 20.0,
            length: 0.1,
            mass: 6.0,
        };
        let out = step_segment(seg, 0.0, &mat(), &Environment::default(), 1.0);
        assert_eq!(out, seg);
    }

    #[test]
    fn net_500_watts_on_one_kilo_raises_one_degree() {
        // Isolate the storage term: no losses, full efficiency.
        let m = MaterialParams {
            specific_heat: 500.0,
            emissivity: 0.0,
            k_below: 1.0,
            k_above: 1.0,
            ..mat()
        };
        let a = Environment {
            convective_coefficient: 0.0,
            ..Environment::default()
        };
        let seg = Segment {
            temperature: 300.0,
            length: 0.1,
            mass: 1.0,
        };
        let out = step_segment(seg, 500.0, &m, &a, 1.0);
        assert!((out.temperature - 301.0).abs() < 1e-12);
    }

    #[test]
    fn hot_segment_under_coil_matches_hand_composition() {
        let m = MaterialParams {
            specific_heat: 650.0,
            ..mat()
        };
        let a = Environment::default();
        let seg = Segment {
            temperature: 900.0,
            length: 0.1,
            mass: 6.0,
        };
        let conv = std::f64::consts::PI * 0.1 * 0.1 * 1.86 * 880f64.powf(1.3);
        let rad = std::f64::consts::PI
            * 0.1
            * 0.1
            * 5.670374419e-8
            * 0.8
            * (1173f64.powi(4) - 293f64.powi(4));
        let expected_dt = (0.20 * 100_000.0 - conv - rad) / (6.0 * 650.0);
        let out = step_segment(seg, 100_000.0, &m, &a, 1.0);
        assert!((out.temperature - 900.0 - expected_dt).abs() < 1e-9 * expected_dt.abs());
    }

    #[test]
    fn large_step_is_floored_at_ambient() {
        let seg = Segment {
            temperature: 25.0,
            length: 0.1,
            mass: 0.01,
        };
        let out = step_segment(seg, 0.0, &mat(), &Environment::default(), 100.0);
        assert_eq!(out.temperature, 20.0);
    }

    #[test]
    fn validation_rejects_inverted_efficiencies() {
        let m = MaterialParams {
            k_above: 0.95,
            ..mat()
        };
        assert_eq!(m.validate().unwrap_err().field, "k_above");
        assert!(MaterialParams::default().validate().is_ok());
        assert!(Environment::default().validate().is_ok());
    }
}

#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    fn segment() -> impl Strategy<Value = Segment> {
        (20.0..1300.0f64, 0.01..0.5f64, 0.1..20.0f64).prop_map(|(t, l, m)| Segment {
            temperature: t,
            length: l,
            mass: m,
        })
    }

    proptest! {
        #[test]
        fn energy_bookkeeping(seg in segment(), share in 0.0..2e5f64, dt in 0.01..2.0f64) {
            let mat = MaterialParams::default();
            let env = Environment::default();
            let out = step_segment(seg, share, &mat, &env, dt);
            let floored = out.temperature == env.ambient_temp;
            if !floored {
                let lhs = (out.temperature - seg.temperature) * seg.mass * mat.specific_heat / dt;
                let rhs = transfer_efficiency(seg.temperature, &mat) * share
                    - convective_loss(seg.temperature, &env, mat.bar_diameter, seg.length)
                    - radiative_loss(seg.temperature, &env, &mat, mat.bar_diameter, seg.length);
                let rounding = 4.0 * f64::EPSILON * out.temperature.abs() * seg.mass * mat.specific_heat / dt;
                prop_assert!((lhs - rhs).abs() <= 1e-9 * rhs.abs() + rounding);
            }
        }

        #[test]
        fn efficiency_is_two_valued(t in -100.0..2000.0f64) {
            let mat = MaterialParams::default();
            let k = transfer_efficiency(t, &mat);
            prop_assert!(k == mat.k_below || k == mat.k_above);
        }

        #[test]
        fn losses_nonnegative_and_zero_only_at_or_below_ambient(t in -50.0..1500.0f64) {
            let mat = MaterialParams::default();
            let env = Environment::default();
            let c = convective_loss(t, &env, 0.1, 0.1);
            let r = radiative_loss(t, &env, &mat, 0.1, 0.1);
            prop_assert!(c >= 0.0 && r >= 0.0);
            prop_assert_eq!(c == 0.0, t <= env.ambient_temp);
            prop_assert_eq!(r == 0.0, t <= env.ambient_temp);
        }

        #[test]
        fn radiation_increases_with_temperature(t in 21.0..1400.0f64, dt in 0.1..100.0f64) {
            let mat = MaterialParams::default();
            let env = Environment::default();
            prop_assert!(radiative_loss(t + dt, &env, &mat, 0.1, 0.1) > radiative_loss(t, &env, &mat, 0.1, 0.1));
        }
    }

    #[test]
    fn unpowered_segment_cools_monotonically_toward_ambient() {
        let mat = MaterialParams::default();
        let env = Environment::default();
        let mut seg = Segment {
            temperature: 1050.0,
            length: 0.1,
            mass: 1.0,
        };
        for _ in 0..10_000 {
            let next = step_segment(seg, 0.0, &mat, &env, 1.0);
            assert!(next.temperature <= seg.temperature);
            seg = next;
        }
        assert!(
            seg.temperature - env.ambient_temp < 10.0,
            "{}",
            seg.temperature
        );
    }

    #[test]
    fn halving_dt_error_is_second_order() {
        let mat = MaterialParams::default();
        let env = Environment::default();
        let seg = Segment {
            temperature: 900.0,
            length: 0.1,
            mass: 10.0,
        };
        let gap = |dt: f64| {
            let one = step_segment(seg, 20_000.0, &mat, &env, dt).temperature;
            let half = step_segment(seg, 20_000.0, &mat, &env, dt / 2.0);
            let two = step_segment(half, 20_000.0, &mat, &env, dt / 2.0).temperature;
            (one - two).abs()
        };
        let (a, b) = (gap(1.0), gap(0.5));
        assert!(a > 0.0);
        assert!((a / b - 4.0).abs() < 0.2, "ratio {}", a / b);
    }
}
