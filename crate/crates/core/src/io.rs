//! Portable text output: CSV tables, JSON sidecars, and plot scripts.
//! All floats are written with 17 significant digits so a decimal
//! round-trip reproduces the bits.

use std::io::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::bifurc::BranchPoint;
use crate::disk::{energy, DiskField};
use crate::radial::RadialProfile;
use crate::spectral::CriticalCoupling;

pub type IoResult<T> = std::io::Result<T>;

/// 17 significant digits: exact decimal round-trip for f64.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Profile table: comment line with R and b, then r,F rows.
pub fn write_profile_csv(path: &Path, profile: &RadialProfile<f64>, b: f64) -> IoResult<()> {
    let mut out = String::new();
    out.push_str(&format!(
        "# R={} b={}\n",
        fmt_f64(profile.domain_radius),
        fmt_f64(b)
    ));
    out.push_str("r,F\n");
    for (i, &r) in profile.grid.nodes().iter().enumerate() {
        out.push_str(&format!("{},{}\n", fmt_f64(r), fmt_f64(profile.values[i])));
    }
    std::fs::write(path, out)
}

/// Parse a profile table back; returns (R, b, rows).
pub fn read_profile_csv(path: &Path) -> IoResult<(f64, f64, Vec<(f64, f64)>)> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let head = lines.next().unwrap_or_default();
    let field = |tag: &str| -> f64 {
        head.split_whitespace()
            .find_map(|tok| tok.strip_prefix(tag))
            .and_then(|v| v.parse().ok())
            .unwrap_or(f64::NAN)
    };
    let (radius, b) = (field("R="), field("b="));
    let mut rows = Vec::new();
    for line in lines.skip(1) {
        let mut it = line.split(',');
        if let (Some(r), Some(f)) = (it.next(), it.next()) {
            rows.push((r.parse().unwrap_or(f64::NAN), f.parse().unwrap_or(f64::NAN)));
        }
    }
    Ok((radius, b, rows))
}

#[derive(Debug, Clone, Copy)]
pub struct SpectralRow {
    pub beta: f64,
    pub lambda: f64,
    pub radius: f64,
    pub mode: usize,
    pub index: usize,
    pub mu: f64,
    pub residual: f64,
}

pub fn write_spectral_csv(path: &Path, rows: &[SpectralRow]) -> IoResult<()> {
    let mut out = String::from("beta,lambda,R,mode,index,mu,residual\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            fmt_f64(r.beta),
            fmt_f64(r.lambda),
            fmt_f64(r.radius),
            r.mode,
            r.index,
            fmt_f64(r.mu),
            fmt_f64(r.residual)
        ));
    }
    std::fs::write(path, out)
}

pub fn write_json<S: Serialize>(path: &Path, value: &S) -> IoResult<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)
}

pub fn write_critical_coupling_json(path: &Path, cc: &CriticalCoupling) -> IoResult<()> {
    write_json(path, cc)
}

/// Field snapshot: one row per node, polar coordinates and both components.
pub fn write_field_csv(path: &Path, field: &DiskField<f64>) -> IoResult<()> {
    let g = &field.grid;
    let mut out = String::from("r,theta,re_psi_plus,im_psi_plus,re_psi_minus,im_psi_minus\n");
    for j in 0..g.n_r {
        for k in 0..g.n_theta {
            let i = g.idx(j, k);
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                fmt_f64(g.r[j]),
                fmt_f64(g.theta[k]),
                fmt_f64(field.psi_plus[i].re),
                fmt_f64(field.psi_plus[i].im),
                fmt_f64(field.psi_minus[i].re),
                fmt_f64(field.psi_minus[i].im)
            ));
        }
    }
    std::fs::write(path, out)
}

#[derive(Serialize)]
struct FieldSidecar {
    epsilon: f64,
    beta: f64,
    degrees: (i32, i32),
    grid: GridMeta,
    energy: EnergyMeta,
}

#[derive(Serialize)]
struct GridMeta {
    n_r: usize,
    n_theta: usize,
    radius: f64,
}

#[derive(Serialize)]
struct EnergyMeta {
    dirichlet: f64,
    potential_iso: f64,
    potential_spin: f64,
    total: f64,
    spin_l2_scaled: f64,
}

pub fn write_field_sidecar(path: &Path, field: &DiskField<f64>) -> IoResult<()> {
    let e = energy(field);
    write_json(
        path,
        &FieldSidecar {
            epsilon: field.epsilon,
            beta: field.beta,
            degrees: field.degrees,
            grid: GridMeta {
                n_r: field.grid.n_r,
                n_theta: field.grid.n_theta,
                radius: field.grid.radius,
            },
            energy: EnergyMeta {
                dirichlet: e.dirichlet,
                potential_iso: e.potential_iso,
                potential_spin: e.potential_spin,
                total: e.total,
                spin_l2_scaled: e.spin_l2_scaled,
            },
        },
    )
}

/// gnuplot script contouring |psi_plus|, |psi_minus| and the spin density
/// from a snapshot CSV written by `write_field_csv`.
pub fn write_plot_script(path: &Path, csv_name: &str) -> IoResult<()> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "set datafile separator ','")?;
    writeln!(f, "set polar") /* informational; surfaces use mapping below */?;
    writeln!(f, "unset polar")?;
    writeln!(f, "set view map")?;
    writeln!(f, "set size square")?;
    writeln!(f, "set pm3d interpolate 2,2")?;
    writeln!(f, "amp_p(a,b) = sqrt(a*a + b*b)")?;
    writeln!(
        f,
        "spin(ap,bp,am,bm) = 0.5*((am*am + bm*bm) - (ap*ap + bp*bp))"
    )?;
    writeln!(f, "set terminal pngcairo size 900,780")?;
    for (tag, expr) in [
        ("abs_psi_plus", "amp_p($3,$4)"),
        ("abs_psi_minus", "amp_p($5,$6)"),
        ("spin", "spin($3,$4,$5,$6)"),
    ] {
        writeln!(f, "set output '{tag}.png'")?;
        writeln!(f, "set title '{tag}'")?;
        writeln!(
            f,
            "splot '{csv_name}' skip 1 using ($1*cos($2)):($1*sin($2)):({expr}) with pm3d notitle"
        )?;
    }
    Ok(())
}

/// Branch table, one row per point ascending in t.
pub fn write_branch_csv(path: &Path, branch: &[BranchPoint<f64>]) -> IoResult<()> {
    let mut out = String::from(
        "t,lambda,energy,abs_z_plus,arg_z_plus,t_symmetry_residual,newton_residual,ground_mu\n",
    );
    for p in branch {
        let (zx, zy) = p.zeros.0;
        let mu = p
            .ground_mu
            .map(fmt_f64)
            .unwrap_or_else(|| "nan".to_string());
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            fmt_f64(p.t),
            fmt_f64(p.lambda),
            fmt_f64(p.energy),
            fmt_f64(f64::hypot(zx, zy)),
            fmt_f64(zy.atan2(zx)),
            fmt_f64(p.t_symmetry_residual),
            fmt_f64(p.newton_residual),
            mu
        ));
    }
    std::fs::write(path, out)
}

#[derive(Serialize)]
pub struct BranchSummary {
    pub beta: f64,
    pub lambda_beta: f64,
    pub phi_second_derivative: f64,
    pub sign: i32,
    pub n_points: usize,
}

pub fn write_branch_summary_json(path: &Path, summary: &BranchSummary) -> IoResult<()> {
    write_json(path, summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radial::solve_bvp;

    #[test]
    fn profile_csv_round_trips_bitwise() {
        let sol = solve_bvp(2.0f64, 1e-10, 128).unwrap();
        let dir = std::env::temp_dir().join("vortexlab_io_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("profile.csv");
        write_profile_csv(&path, &sol.profile, sol.profile.slope_b).unwrap();
        let (radius, b, rows) = read_profile_csv(&path).unwrap();
        assert_eq!(radius.to_bits(), sol.profile.domain_radius.to_bits());
        assert_eq!(b.to_bits(), sol.profile.slope_b.to_bits());
        assert_eq!(rows.len(), sol.profile.grid.nodes().len());
        for (i, &(r, f)) in rows.iter().enumerate() {
            assert_eq!(r.to_bits(), sol.profile.grid.nodes()[i].to_bits());
            assert_eq!(f.to_bits(), sol.profile.values[i].to_bits());
        }
    }

    #[test]
    fn snapshot_and_sidecar_written() {
        let grid = crate::disk::DiskGrid::unit(16, 16);
        let field = crate::disk::DiskField::initial(grid, (1, 1), 0.2, 0.5);
        let dir = std::env::temp_dir().join("vortexlab_io_test");
        std::fs::create_dir_all(&dir).unwrap();
        let csv = dir.join("field.csv");
        write_field_csv(&csv, &field).unwrap();
        write_field_sidecar(&dir.join("field.json"), &field).unwrap();
        write_plot_script(&dir.join("field.gp"), "field.csv").unwrap();
        let body = std::fs::read_to_string(&csv).unwrap();
        assert_eq!(body.lines().count(), 1 + 16 * 16);
        let side = std::fs::read_to_string(dir.join("field.json")).unwrap();
        assert!(side.contains("\"epsilon\""));
        assert!(side.contains("\"dirichlet\""));
    }
}
