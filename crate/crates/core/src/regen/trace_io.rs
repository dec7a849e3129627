use std::io::Write;

use super::SplitTrace;
use crate::chains::hrem::HremState;
use crate::error::{Error, Result};

/// A state that can be written as CSV columns.
pub trait TraceState {
    fn header(&self) -> Vec<String>;
    fn fields(&self) -> Vec<String>;
}

impl TraceState for f64 {
    fn header(&self) -> Vec<String> {
        vec!["x".into()]
    }
    fn fields(&self) -> Vec<String> {
        vec![self.to_string()]
    }
}

impl TraceState for usize {
    fn header(&self) -> Vec<String> {
        vec!["state".into()]
    }
    fn fields(&self) -> Vec<String> {
        vec![self.to_string()]
    }
}

impl TraceState for HremState {
    fn header(&self) -> Vec<String> {
        let mut h: Vec<String> = (1..=self.theta.len()).map(|i| format!("theta{i}")).collect();
        h.extend(["mu", "lambda_theta", "lambda_e"].map(String::from));
        h
    }
    fn fields(&self) -> Vec<String> {
        let mut f: Vec<String> = self.theta.iter().map(|v| v.to_string()).collect();
        f.extend([self.mu, self.lambda_theta, self.lambda_e].map(|v| v.to_string()));
        f
    }
}

/// Columns `index, <state...>, bell`; the bell column is filled at skeleton
/// times `nm` only.
pub fn write_trace_csv<S: TraceState, W: Write>(trace: &SplitTrace<S>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    let Some(first) = trace.states.first() else {
        return Ok(());
    };
    let mut header = vec!["index".to_string()];
    header.extend(first.header());
    header.push("bell".into());
    w.write_record(&header).map_err(csv_err)?;
    let m = trace.m as usize;
    for (i, s) in trace.states.iter().enumerate() {
        let mut rec = vec![i.to_string()];
        rec.extend(s.fields());
        rec.push(if i % m == 0 { (trace.bells[i / m] as u8).to_string() } else { String::new() });
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn skeleton_bells_only() {
        let t = SplitTrace::from_parts(vec![0usize, 1, 2, 3], vec![true, false], 2, Some(0.5));
        let mut buf = Vec::new();
        write_trace_csv(&t, &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s, "index,state,bell\n0,0,1\n1,1,\n2,2,0\n3,3,\n");
    }
}
