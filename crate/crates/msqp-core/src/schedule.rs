//! Piecewise classical controls: drive pulses and resonator detuning.
//!
//! A schedule is a pure function of time. Drive carriers are referenced to the
//! global t = 0, so the phase relationship between pulses on the same
//! transition is maintained automatically without per-pulse frame bookkeeping.

use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Rectangular microwave drive pulse on the shared spin control line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DrivePulse {
    /// Amplitude B₁ in G.
    pub b1_gauss: f64,
    /// Carrier frequency in GHz.
    pub freq_ghz: f64,
    /// Carrier phase in rad, referenced to t = 0.
    pub phase: f64,
    /// Start time, ns.
    pub t0_ns: f64,
    /// Duration, ns.
    pub dur_ns: f64,
}

impl DrivePulse {
    pub fn validate(&self) -> Result<()> {
        if self.dur_ns <= 0.0 {
            return Err(Error::Spec("drive pulse duration must be positive".into()));
        }
        if self.b1_gauss < 0.0 {
            return Err(Error::Spec("drive amplitude must be ≥ 0".into()));
        }
        Ok(())
    }

    /// Instantaneous drive field B₁·cos(2πft + φ) in G; zero outside the window.
    pub fn field_at(&self, t_ns: f64) -> f64 {
        if t_ns < self.t0_ns || t_ns >= self.t0_ns + self.dur_ns {
            return 0.0;
        }
        self.b1_gauss * (2.0 * std::f64::consts::PI * self.freq_ghz * t_ns + self.phase).cos()
    }

    pub fn end_ns(&self) -> f64 {
        self.t0_ns + self.dur_ns
    }
}

/// One resonator detuning segment: ω_r = ω₀ + δ during the window.
///
/// The detuning moves linearly from its previous value over `ramp_ns` at the
/// start of the window and back to the follow-on value at the end.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetuningSegment {
    /// Start time, ns.
    pub t0_ns: f64,
    /// Duration, ns.
    pub dur_ns: f64,
    /// Target detuning δ from the bare frequency, GHz.
    pub delta_ghz: f64,
    /// Linear ramp time at the segment start, ns.
    pub ramp_ns: f64,
}

impl DetuningSegment {
    pub fn validate(&self) -> Result<()> {
        if self.dur_ns <= 0.0 {
            return Err(Error::Spec("detuning segment duration must be positive".into()));
        }
        if self.ramp_ns < 0.0 || self.ramp_ns > self.dur_ns {
            return Err(Error::Spec("ramp time must lie within the segment".into()));
        }
        Ok(())
    }

    pub fn end_ns(&self) -> f64 {
        self.t0_ns + self.dur_ns
    }
}

/// Additive local-field bias segment on one qudit (δB in mT on its S_z term).
///
/// Models a local current line shifting one qudit's gaps; rise time is
/// instantaneous.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalShiftSegment {
    /// Qudit index, 1 or 2.
    pub qudit: u8,
    /// Start time, ns.
    pub t0_ns: f64,
    /// Duration, ns.
    pub dur_ns: f64,
    /// Field shift δB, mT.
    pub db_mt: f64,
}

impl LocalShiftSegment {
    pub fn validate(&self) -> Result<()> {
        if self.dur_ns <= 0.0 {
            return Err(Error::Spec("local shift duration must be positive".into()));
        }
        if self.qudit != 1 && self.qudit != 2 {
            return Err(Error::Spec("local shift qudit must be 1 or 2".into()));
        }
        Ok(())
    }

    pub fn end_ns(&self) -> f64 {
        self.t0_ns + self.dur_ns
    }
}

/// Ordered drive and detuning programs over a fixed time span.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ControlSchedule {
    pub pulses: Vec<DrivePulse>,
    pub detunings: Vec<DetuningSegment>,
    pub local_shifts: Vec<LocalShiftSegment>,
    /// Total span, ns.
    pub span_ns: f64,
}

impl ControlSchedule {
    pub fn new(span_ns: f64) -> Self {
        Self { pulses: Vec::new(), detunings: Vec::new(), local_shifts: Vec::new(), span_ns }
    }

    /// Append a drive pulse, rejecting overlap with existing pulses.
    pub fn add_pulse(&mut self, p: DrivePulse) -> Result<()> {
        p.validate()?;
        for q in &self.pulses {
            if p.t0_ns < q.end_ns() - 1e-9 && q.t0_ns < p.end_ns() - 1e-9 {
                return Err(Error::Spec(format!(
                    "drive pulses overlap at t ≈ {:.3} ns",
                    p.t0_ns.max(q.t0_ns)
                )));
            }
        }
        self.pulses.push(p);
        self.span_ns = self.span_ns.max(p.end_ns());
        Ok(())
    }

    /// Append a detuning segment, rejecting overlap with existing segments.
    pub fn add_detuning(&mut self, s: DetuningSegment) -> Result<()> {
        s.validate()?;
        for q in &self.detunings {
            if s.t0_ns < q.end_ns() - 1e-9 && q.t0_ns < s.end_ns() - 1e-9 {
                return Err(Error::Spec(format!(
                    "detuning segments overlap at t ≈ {:.3} ns",
                    s.t0_ns.max(q.t0_ns)
                )));
            }
        }
        self.detunings.push(s);
        self.span_ns = self.span_ns.max(s.end_ns());
        Ok(())
    }

    /// Append a local-field shift segment, rejecting overlap on the same qudit.
    pub fn add_local_shift(&mut self, s: LocalShiftSegment) -> Result<()> {
        s.validate()?;
        for q in &self.local_shifts {
            if q.qudit == s.qudit && s.t0_ns < q.end_ns() - 1e-9 && q.t0_ns < s.end_ns() - 1e-9 {
                return Err(Error::Spec(format!(
                    "local shift segments overlap at t ≈ {:.3} ns",
                    s.t0_ns.max(q.t0_ns)
                )));
            }
        }
        self.local_shifts.push(s);
        self.span_ns = self.span_ns.max(s.end_ns());
        Ok(())
    }

    /// Local-field shift δB(t) on one qudit, mT.
    pub fn local_shift_at(&self, t_ns: f64, qudit: u8) -> f64 {
        for s in &self.local_shifts {
            if s.qudit == qudit && t_ns >= s.t0_ns && t_ns < s.end_ns() {
                return s.db_mt;
            }
        }
        0.0
    }

    /// Detuning δ(t) in GHz, including linear ramps.
    pub fn delta_at(&self, t_ns: f64) -> f64 {
        for (idx, s) in self.detunings.iter().enumerate() {
            if t_ns >= s.t0_ns && t_ns < s.end_ns() {
                if s.ramp_ns > 0.0 && t_ns < s.t0_ns + s.ramp_ns {
                    let prev = self.delta_before(idx);
                    let f = (t_ns - s.t0_ns) / s.ramp_ns;
                    return prev + (s.delta_ghz - prev) * f;
                }
                return s.delta_ghz;
            }
        }
        0.0
    }

    fn delta_before(&self, idx: usize) -> f64 {
        let t0 = self.detunings[idx].t0_ns;
        for (j, q) in self.detunings.iter().enumerate() {
            if j != idx && (q.end_ns() - t0).abs() < 1e-9 {
                return q.delta_ghz;
            }
        }
        0.0
    }

    /// Total drive field in G at time t, summed over active pulses.
    pub fn drive_field_at(&self, t_ns: f64) -> f64 {
        self.pulses.iter().map(|p| p.field_at(t_ns)).sum()
    }

    /// Check the tunability bound |δ| ≤ 0.3·ω₀.
    pub fn validate_against(&self, omega0_ghz: f64) -> Result<()> {
        for s in &self.detunings {
            s.validate()?;
            if s.delta_ghz.abs() > 0.3 * omega0_ghz {
                return Err(Error::Spec(format!(
                    "detuning {:.4} GHz exceeds the tunability bound 0.3·ω₀ = {:.4} GHz",
                    s.delta_ghz,
                    0.3 * omega0_ghz
                )));
            }
        }
        for p in &self.pulses {
            p.validate()?;
        }
        Ok(())
    }

    /// Time points where the controls are non-smooth, sorted and deduplicated.
    ///
    /// Integration steps are aligned to these so that fixed-step RK4 never
    /// straddles a control discontinuity.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut pts = vec![0.0, self.span_ns];
        for p in &self.pulses {
            pts.push(p.t0_ns);
            pts.push(p.end_ns());
        }
        for s in &self.detunings {
            pts.push(s.t0_ns);
            if s.ramp_ns > 0.0 {
                pts.push(s.t0_ns + s.ramp_ns);
            }
            pts.push(s.end_ns());
        }
        for s in &self.local_shifts {
            pts.push(s.t0_ns);
            pts.push(s.end_ns());
        }
        pts.retain(|&t| t >= 0.0 && t <= self.span_ns + 1e-9);
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        pts.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
        pts
    }

    /// Largest drive carrier frequency, GHz.
    pub fn max_carrier_ghz(&self) -> f64 {
        self.pulses.iter().map(|p| p.freq_ghz.abs()).fold(0.0, f64::max)
    }

    /// Serialize to the pulse-table text format.
    ///
    /// Columns: `channel,t0_ns,dur_ns,param1,param2,param3`. Drive rows carry
    /// (B₁ G, carrier GHz, phase rad); detuning rows carry (δ GHz, ramp ns, 0).
    pub fn to_table(&self) -> String {
        let mut rows: Vec<(f64, String)> = Vec::new();
        for p in &self.pulses {
            rows.push((
                p.t0_ns,
                format!(
                    "drive,{:.9},{:.9},{:.9},{:.9},{:.9}",
                    p.t0_ns, p.dur_ns, p.b1_gauss, p.freq_ghz, p.phase
                ),
            ));
        }
        for s in &self.detunings {
            rows.push((
                s.t0_ns,
                format!(
                    "detuning,{:.9},{:.9},{:.9},{:.9},{:.9}",
                    s.t0_ns, s.dur_ns, s.delta_ghz, s.ramp_ns, 0.0
                ),
            ));
        }
        for s in &self.local_shifts {
            rows.push((
                s.t0_ns,
                format!(
                    "local{},{:.9},{:.9},{:.9},{:.9},{:.9}",
                    s.qudit, s.t0_ns, s.dur_ns, s.db_mt, 0.0, 0.0
                ),
            ));
        }
        rows.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        let mut out = String::from("channel,t0_ns,dur_ns,param1,param2,param3\n");
        for (_, r) in rows {
            let _ = writeln!(out, "{r}");
        }
        let _ = writeln!(out, "# span_ns={:.9}", self.span_ns);
        out
    }

    /// Parse the pulse-table text format.
    pub fn from_table(text: &str) -> Result<Self> {
        let mut sched = ControlSchedule::new(0.0);
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with("channel,") {
                continue;
            }
            if let Some(rest) = line.strip_prefix("# span_ns=") {
                let span: f64 = rest
                    .parse()
                    .map_err(|_| Error::Config(format!("line {}: bad span", lineno + 1)))?;
                sched.span_ns = sched.span_ns.max(span);
                continue;
            }
            if line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 6 {
                return Err(Error::Config(format!(
                    "line {}: expected 6 columns, got {}",
                    lineno + 1,
                    fields.len()
                )));
            }
            let num = |i: usize| -> Result<f64> {
                fields[i]
                    .parse()
                    .map_err(|_| Error::Config(format!("line {}: bad number '{}'", lineno + 1, fields[i])))
            };
            match fields[0] {
                "drive" => sched.add_pulse(DrivePulse {
                    t0_ns: num(1)?,
                    dur_ns: num(2)?,
                    b1_gauss: num(3)?,
                    freq_ghz: num(4)?,
                    phase: num(5)?,
                })?,
                "detuning" => sched.add_detuning(DetuningSegment {
                    t0_ns: num(1)?,
                    dur_ns: num(2)?,
                    delta_ghz: num(3)?,
                    ramp_ns: num(4)?,
                })?,
                "local1" | "local2" => sched.add_local_shift(LocalShiftSegment {
                    qudit: if fields[0] == "local1" { 1 } else { 2 },
                    t0_ns: num(1)?,
                    dur_ns: num(2)?,
                    db_mt: num(3)?,
                })?,
                other => {
                    return Err(Error::Config(format!("line {}: unknown channel '{other}'", lineno + 1)))
                }
            }
        }
        Ok(sched)
    }

    /// Shift every pulse and segment later by `dt_ns`, preserving carrier
    /// phases relative to t = 0.
    pub fn shifted(&self, dt_ns: f64) -> Self {
        let mut out = self.clone();
        for p in &mut out.pulses {
            p.t0_ns += dt_ns;
        }
        for s in &mut out.detunings {
            s.t0_ns += dt_ns;
        }
        for s in &mut out.local_shifts {
            s.t0_ns += dt_ns;
        }
        out.span_ns += dt_ns;
        out
    }

    /// Merge another schedule into this one.
    pub fn extend(&mut self, other: &ControlSchedule) -> Result<()> {
        for p in &other.pulses {
            self.add_pulse(*p)?;
        }
        for s in &other.detunings {
            self.add_detuning(*s)?;
        }
        for s in &other.local_shifts {
            self.add_local_shift(*s)?;
        }
        self.span_ns = self.span_ns.max(other.span_ns);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn delta_with_ramp_interpolates() {
        let mut s = ControlSchedule::new(100.0);
        s.add_detuning(DetuningSegment { t0_ns: 10.0, dur_ns: 20.0, delta_ghz: -1.2, ramp_ns: 1.0 })
            .unwrap();
        assert_relative_eq!(s.delta_at(5.0), 0.0);
        assert_relative_eq!(s.delta_at(10.5), -0.6);
        assert_relative_eq!(s.delta_at(15.0), -1.2);
        assert_relative_eq!(s.delta_at(30.0), 0.0);
    }

    #[test]
    fn contiguous_segments_ramp_from_previous_target() {
        let mut s = ControlSchedule::new(100.0);
        s.add_detuning(DetuningSegment { t0_ns: 0.0, dur_ns: 10.0, delta_ghz: -1.0, ramp_ns: 0.0 })
            .unwrap();
        s.add_detuning(DetuningSegment { t0_ns: 10.0, dur_ns: 10.0, delta_ghz: 1.0, ramp_ns: 2.0 })
            .unwrap();
        assert_relative_eq!(s.delta_at(11.0), 0.0);
        assert_relative_eq!(s.delta_at(12.0), 1.0);
    }

    #[test]
    fn overlap_rejected() {
        let mut s = ControlSchedule::new(10.0);
        s.add_detuning(DetuningSegment { t0_ns: 0.0, dur_ns: 5.0, delta_ghz: 0.1, ramp_ns: 0.0 })
            .unwrap();
        assert!(s
            .add_detuning(DetuningSegment { t0_ns: 4.0, dur_ns: 5.0, delta_ghz: 0.2, ramp_ns: 0.0 })
            .is_err());
    }

    #[test]
    fn schedule_is_pure() {
        let mut s = ControlSchedule::new(50.0);
        s.add_pulse(DrivePulse { b1_gauss: 2.0, freq_ghz: 5.7, phase: 0.3, t0_ns: 1.0, dur_ns: 17.0 })
            .unwrap();
        for t in [0.0, 1.0, 5.3, 17.9, 18.1] {
            assert_eq!(s.drive_field_at(t), s.drive_field_at(t));
            assert_eq!(s.delta_at(t), s.delta_at(t));
        }
    }

    #[test]
    fn table_round_trip() {
        let mut s = ControlSchedule::new(0.0);
        s.add_pulse(DrivePulse { b1_gauss: 2.0, freq_ghz: 8.4996245, phase: 1.5, t0_ns: 0.0, dur_ns: 17.03 })
            .unwrap();
        s.add_detuning(DetuningSegment { t0_ns: 20.0, dur_ns: 265.0, delta_ghz: -1.1996245, ramp_ns: 1.0 })
            .unwrap();
        s.span_ns = 300.0;
        let text = s.to_table();
        let back = ControlSchedule::from_table(&text).unwrap();
        assert_eq!(back.pulses.len(), 1);
        assert_eq!(back.detunings.len(), 1);
        assert_relative_eq!(back.span_ns, 300.0);
        assert_relative_eq!(back.pulses[0].freq_ghz, 8.4996245, epsilon = 1e-9);
        assert_eq!(text, back.to_table());
    }

    #[test]
    fn tunability_bound_enforced() {
        let mut s = ControlSchedule::new(10.0);
        s.add_detuning(DetuningSegment { t0_ns: 0.0, dur_ns: 5.0, delta_ghz: -3.0, ramp_ns: 0.0 })
            .unwrap();
        assert!(s.validate_against(7.5).is_err());
        s.detunings[0].delta_ghz = -1.2;
        assert!(s.validate_against(7.5).is_ok());
    }
}
