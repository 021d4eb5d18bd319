use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use super::{AnalyticError, AnalyticParams, Model, SuccessResult};
use crate::numfmt::sig9;
use crate::ProtocolKind;

pub const CURVE_CSV_HEADER: &str = "protocol,x,p_fail_exclusive,p_fail_overlap,p_success";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub x: f64,
    pub result: SuccessResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub protocol: ProtocolKind,
    pub points: Vec<CurvePoint>,
}

/// One curve per protocol over a shared x grid.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CurveTable {
    pub curves: Vec<Curve>,
}

impl CurveTable {
    pub fn curve(&self, protocol: ProtocolKind) -> Option<&Curve> {
        self.curves.iter().find(|c| c.protocol == protocol)
    }

    pub fn row_count(&self) -> usize {
        self.curves.iter().map(|c| c.points.len()).sum()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{CURVE_CSV_HEADER}")?;
        for curve in &self.curves {
            for pt in &curve.points {
                writeln!(
                    out,
                    "{},{},{},{},{}",
                    curve.protocol,
                    sig9(pt.x),
                    sig9(pt.result.p_fail_exclusive),
                    sig9(pt.result.p_fail_overlap),
                    sig9(pt.result.p_success),
                )?;
            }
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("csv is ascii")
    }
}

fn sweep<F>(
    model: &Model,
    protocols: &[ProtocolKind],
    xs: &[f64],
    mut params_at: F,
) -> Result<CurveTable, AnalyticError>
where
    F: FnMut(f64) -> AnalyticParams,
{
    if xs.is_empty() {
        return Err(AnalyticError::EmptyGrid);
    }
    let mut curves = Vec::with_capacity(protocols.len());
    for &protocol in protocols {
        let points = xs
            .iter()
            .map(|&x| {
                model
                    .success_probability(protocol, &params_at(x))
                    .map(|result| CurvePoint { x, result })
            })
            .collect::<Result<Vec<_>, _>>()?;
        curves.push(Curve { protocol, points });
    }
    Ok(CurveTable { curves })
}

/// Success probability against inter-AP distance.
pub fn sweep_distance(
    model: &Model,
    protocols: &[ProtocolKind],
    params: &AnalyticParams,
    d_values: &[f64],
) -> Result<CurveTable, AnalyticError> {
    if let Some(&bad) = d_values.iter().find(|d| !(**d >= 0.0) || !d.is_finite()) {
        return Err(AnalyticError::InvalidParameter { name: "d", value: bad });
    }
    sweep(model, protocols, d_values, |d| params.with_distance(d))
}

/// Success probability against the participation ratio, applied to both the
/// triggered and the sharing fraction.
pub fn sweep_participation(
    model: &Model,
    protocols: &[ProtocolKind],
    params: &AnalyticParams,
    rho_values: &[f64],
) -> Result<CurveTable, AnalyticError> {
    if let Some(&bad) = rho_values.iter().find(|r| !(0.0..=1.0).contains(*r)) {
        return Err(AnalyticError::InvalidParameter {
            name: "rho",
            value: bad,
        });
    }
    sweep(model, protocols, rho_values, |rho| params.with_participation(rho))
}

/// `0, step, 2·step, …` up to and including `max` (within rounding).
pub fn grid(max: f64, step: f64) -> Vec<f64> {
    if max <= 0.0 || step <= 0.0 {
        return vec![0.0];
    }
    let n = (max / step + 1e-9).floor() as usize;
    (0..=n).map(|k| (k as f64 * step).min(max)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_counts() {
        assert_eq!(grid(20.0, 0.5).len(), 41);
        assert_eq!(grid(1.0, 0.05).len(), 21);
        assert_eq!(grid(0.0, 0.5), vec![0.0]);
        assert_eq!(*grid(1.0, 0.05).last().unwrap(), 1.0);
    }

    #[test]
    fn csv_layout() {
        let t = sweep_distance(
            &Model::default(),
            &ProtocolKind::ALL,
            &AnalyticParams::default(),
            &[20.0],
        )
        .unwrap();
        let csv = t.to_csv_string();
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], CURVE_CSV_HEADER);
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("edca,20,"));
        assert!(lines[1].ends_with(",0,0.882132759"), "{}", lines[1]);
    }

    #[test]
    fn single_point_matches_direct() {
        let model = Model::default();
        let p = AnalyticParams::default();
        let t = sweep_distance(&model, &[ProtocolKind::SharingBased], &p, &[20.0]).unwrap();
        let direct = model
            .success_probability(ProtocolKind::SharingBased, &p.with_distance(20.0))
            .unwrap();
        assert_eq!(t.curves[0].points[0].result, direct);
    }

    #[test]
    fn edca_flat_in_rho() {
        let t = sweep_participation(
            &Model::default(),
            &[ProtocolKind::Edca],
            &AnalyticParams::default(),
            &[0.0, 1.0],
        )
        .unwrap();
        let pts = &t.curves[0].points;
        assert_eq!(pts[0].result.p_success, pts[1].result.p_success);
    }

    #[test]
    fn rejects_bad_grids() {
        let m = Model::default();
        let p = AnalyticParams::default();
        assert!(matches!(
            sweep_distance(&m, &ProtocolKind::ALL, &p, &[]),
            Err(AnalyticError::EmptyGrid)
        ));
        assert!(sweep_distance(&m, &ProtocolKind::ALL, &p, &[-1.0]).is_err());
        assert!(sweep_participation(&m, &ProtocolKind::ALL, &p, &[1.2]).is_err());
    }
}
