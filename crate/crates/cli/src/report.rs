//! Deterministic report formatting. The JSON emitter is hand-rolled so that
//! identical inputs produce byte-identical output: fixed key order, fixed
//! 17-significant-digit number format, no hash-map iteration anywhere.

/// 17 significant digits, round-trip safe for f64.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "\"nan\"".into()
    } else if v > 0.0 {
        "\"inf\"".into()
    } else {
        "\"-inf\"".into()
    }
}

pub fn json_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => out.push_str(&format!("\\u{:04x}", c as u32)),
            c => out.push(c),
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct Report {
    pub max_residual: f64,
    pub mean_residual: f64,
    pub tolerance: f64,
    pub grid_points: usize,
    pub solution: String,
    pub branch_notes: Vec<String>,
}

impl Report {
    pub fn pass(&self) -> bool {
        self.max_residual <= self.tolerance
    }

    pub fn to_json(&self) -> String {
        let notes: Vec<String> = self
            .branch_notes
            .iter()
            .map(|n| format!("\"{}\"", json_escape(n)))
            .collect();
        format!(
            "{{\"max_residual\":{},\"mean_residual\":{},\"tolerance\":{},\"grid_points\":{},\"solution\":\"{}\",\"branch_notes\":[{}]}}",
            fmt_f64(self.max_residual),
            fmt_f64(self.mean_residual),
            fmt_f64(self.tolerance),
            self.grid_points,
            json_escape(&self.solution),
            notes.join(",")
        )
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("solution:      {}\n", self.solution));
        out.push_str(&format!("max residual:  {:.3e}\n", self.max_residual));
        out.push_str(&format!("mean residual: {:.3e}\n", self.mean_residual));
        out.push_str(&format!("tolerance:     {:.3e}\n", self.tolerance));
        out.push_str(&format!("grid points:   {}\n", self.grid_points));
        for n in &self.branch_notes {
            out.push_str(&format!("note: {n}\n"));
        }
        out.push_str(if self.pass() { "verdict: PASS\n" } else { "verdict: FAIL\n" });
        out
    }
}

pub fn error_json(msg: &str) -> String {
    format!("{{\"error\":\"{}\"}}", json_escape(msg))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format_is_17_digits_and_stable() {
        assert_eq!(fmt_f64(0.5), "5.0000000000000000e-1");
        assert_eq!(fmt_f64(1.0 / 3.0), "3.3333333333333331e-1");
        let v = 0.1 + 0.2;
        assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
    }

    #[test]
    fn json_shape() {
        let r = Report {
            max_residual: 1e-10,
            mean_residual: 5e-11,
            tolerance: 1e-9,
            grid_points: 50,
            solution: "grid-backed".into(),
            branch_notes: vec!["note \"a\"".into()],
        };
        let j = r.to_json();
        assert!(j.starts_with("{\"max_residual\":"));
        assert!(j.contains("\\\"a\\\""));
        assert!(r.pass());
    }
}
