use stochhom::kinetic::{chi_identity_check, rigidity_defect, XiGrid};
use stochhom::lab::YoungMeasureHistogram;

use super::{text, Assertion, Outcome};
use crate::config::Config;
use crate::error::CliError;

pub const KINETIC: &str = "\
[sweep]
probes = -2.5, -1, -0.3, 0, 0.7, 1.9
xi_step = 0.001
";

const IDENTITIES: [&str; 4] = [
    "int chi(u)",
    "int chi+(u)(1-chi+(v))",
    "int |chi+(u)-chi+(v)|",
    "int g-g^2",
];

pub fn identities(cfg: &Config) -> Result<Outcome, CliError> {
    let probes = cfg.f64_list("sweep", "probes", &[-1.0, 0.0, 1.0])?;
    let step = cfg.f64("sweep", "xi_step", 1e-3)?;
    if probes.is_empty() || !(step > 0.0) {
        return Err(CliError::Validation(
            "need probes and a positive sweep.xi_step".into(),
        ));
    }
    let lo = probes.iter().copied().fold(0.0, f64::min) - 1.5;
    let hi = probes.iter().copied().fold(0.0, f64::max) + 1.5;
    let grid = XiGrid::covering(lo, hi, step)?;

    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for &u in &probes {
        for &v in &probes {
            let c = chi_identity_check(u, v, &grid)?;
            for (k, name) in IDENTITIES.iter().enumerate() {
                let r = (c.integrals[k] - c.exact[k]).abs();
                worst = worst.max(r);
                rows.push(format!(
                    "{u:.17e},{v:.17e},{name},{:.17e},{:.17e},{r:.17e}",
                    c.integrals[k], c.exact[k]
                ));
            }
        }
    }

    // unit-separated spikes of mass 1/2, coarse and fine xi-binning
    let two = YoungMeasureHistogram::from_weights(-0.5, 1.5, vec![vec![0.5, 0.5]])?;
    let mut fine = vec![0.0; 200];
    fine[0] = 0.5;
    fine[100] = 0.5;
    let spread = YoungMeasureHistogram::from_weights(-0.005, 1.995, vec![fine])?;
    let (d_two, d_fine) = (rigidity_defect(&two), rigidity_defect(&spread));

    let mut out = Outcome::default();
    out.file(
        "residuals.csv",
        text("u,v,identity,quadrature,exact,residual", rows),
    );
    out.file(
        "rigidity.csv",
        text(
            "xi_bins,defect",
            [format!("2,{d_two:.17e}"), format!("200,{d_fine:.17e}")],
        ),
    );
    out.check(Assertion::at_most(
        "chi identity residual",
        worst,
        2.0 * step,
    ));
    out.check(Assertion::equals("two-point rigidity defect", d_two, 0.25));
    out.check(Assertion::at_most(
        "two-point rigidity defect, 200 bins",
        (d_fine - 0.25).abs(),
        1e-12,
    ));
    Ok(out)
}
