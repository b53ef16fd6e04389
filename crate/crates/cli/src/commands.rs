use std::path::PathBuf;

use nalgebra::DVector;
use serde::Serialize;
use serde_json::{json, Value};

use thinshell::bodies::{direction_set, ka_convexity_check, ka_distance_comparison, ka_inclusion_check, ka_radial};
use thinshell::calib::{self, CalibConstants};
use thinshell::calibration::run_calibration;
use thinshell::concavity::{default_p_grid, h_transform, khinchine_check, Functional, PiecewiseLinearConvex};
use thinshell::moments::{
    alpha_limit, alpha_p_fnr, chebyshev_link_norms, epsilon_from_norms, exact_moment_fnr, mc_moment_norms,
};
use thinshell::quad::QuadConfig;
use thinshell::rotations::{loglip_grid, polar_moment_check, reverse_holder_check, stretch_map, HkpContext, LipGridPoint};
use thinshell::sampling::sample_norms;
use thinshell::{make_fnr, MeasureModel, RngStream};

use crate::config::*;
use crate::error::CliError;
use crate::output::Artifacts;

/// Runs one experiment; `Ok(false)` means a check failed.
pub fn run(exp: &Experiment) -> Result<bool, CliError> {
    exp.validate()?;
    let mut out = Artifacts::new(exp)?;
    let passes = match exp {
        Experiment::Moments(a) => moments(a, &mut out),
        Experiment::Fact(a) => fact(a, &mut out),
        Experiment::ThinShell(a) => thin_shell(a, &mut out),
        Experiment::BodiesCheck(a) => bodies(a, &mut out),
        Experiment::ConcavityCheck(a) => concavity(a, &mut out),
        Experiment::Khinchine(a) => khinchine(a, &mut out),
        Experiment::PolarMoment(a) => polar_moment(a, &mut out),
        Experiment::ReverseHolder(a) => reverse_holder(a, &mut out),
        Experiment::Loglip(a) => loglip(a, &mut out),
        Experiment::Calibrate(a) => calibrate(a, &mut out),
        Experiment::Report(_) => report(&mut out),
    }?;
    for path in out.written() {
        println!("wrote {}", path.display());
    }
    println!("{}: {}", exp.name(), if passes { "PASS" } else { "FAIL" });
    Ok(passes)
}

fn stream(common: &Common, index: u64) -> RngStream {
    RngStream::new(common.seed, index)
}

fn model(n: usize, r: f64, cond: f64) -> Result<MeasureModel, CliError> {
    let base = make_fnr(n, r)?;
    if cond == 1.0 {
        return Ok(base);
    }
    Ok(MeasureModel::affine(&base, stretch_map(n, cond), DVector::zeros(n))?)
}

fn load_calib(common: &Common, path: &CalibPath) -> Result<CalibConstants, CliError> {
    let file = path.calib.clone().unwrap_or_else(|| common.out_dir().join("calibration.json"));
    if !file.exists() {
        return Err(CliError::Usage(format!(
            "calibration file {} not found; run `thinshell calibrate` first",
            file.display()
        )));
    }
    Ok(CalibConstants::load(&file)?)
}

fn used(calib: &CalibConstants, names: &[&str]) -> Result<Value, CliError> {
    let mut map = serde_json::Map::new();
    for &name in names {
        map.insert(name.to_string(), json!(calib.value(name)?));
    }
    Ok(Value::Object(map))
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "fail"
    }
}

#[derive(Serialize)]
struct MomentRow {
    p: f64,
    exact: f64,
    mc: f64,
    std_error: f64,
    z: f64,
    /// False when `|X|^p` has infinite variance and the SE is meaningless.
    checked: bool,
    passes: bool,
}

fn moments(a: &MomentsArgs, out: &mut Artifacts) -> Result<bool, CliError> {
    let norms = sample_norms(stream(&a.common, 0), &make_fnr(a.n, a.r)?, a.samples)?;
    let mut rows = Vec::new();
    for &p in &a.p {
        let exact = exact_moment_fnr(a.n, a.r, p)?.value;
        let mc = mc_moment_norms(&norms, p, Some((a.n as f64, a.r)))?;
        let z = (mc.value - exact) / mc.std_error;
        let checked = !mc.heavy_tail;
        rows.push(MomentRow { p, exact, mc: mc.value, std_error: mc.std_error, z, checked, passes: !checked || z.abs() <= a.z_max });
    }
    let passes = rows.iter().all(|r| r.passes);
    let lines: Vec<String> = rows
        .iter()
        .map(|r| format!("{},{},{},{},{},{},{}", r.p, r.exact, r.mc, r.std_error, r.z, r.checked, verdict(r.passes)))
        .collect();
    out.csv("moments", "p,exact,mc,std_error,z,checked,passes", &lines)?;
    out.json("moments", Some(passes), None, &json!({ "n": a.n, "r": a.r, "samples": a.samples, "rows": rows }))?;
    Ok(passes)
}

fn fact(a: &FactArgs, out: &mut Artifacts) -> Result<bool, CliError> {
    let limit = alpha_limit(a.r, a.p)?;
    let alphas = a.n_grid.iter().map(|&n| alpha_p_fnr(n, a.r, a.p)).collect::<Result<Vec<_>, _>>()?;
    let gaps: Vec<f64> = alphas.iter().map(|x| (x - limit).abs()).collect();
    let passes = gaps.windows(2).all(|w| w[1] < w[0]);
    let lines: Vec<String> = a.n_grid.iter().zip(&alphas).map(|(n, x)| format!("{n},{},{},{x},{limit}", a.r, a.p)).collect();
    out.csv("fact", "n,r,p,alpha_exact,alpha_limit", &lines)?;
    out.json("fact", Some(passes), None, &json!({ "alpha_limit": limit, "n": a.n_grid, "alpha": alphas }))?;
    Ok(passes)
}

fn thin_shell(a: &ThinShellArgs, out: &mut Artifacts) -> Result<bool, CliError> {
    let norms = sample_norms(stream(&a.common, 0), &make_fnr(a.n, a.r)?, a.samples)?;
    let report = epsilon_from_norms(&norms, a.n);
    let mut buf = Vec::new();
    report.write_survival_csv(&mut buf, a.survival_rows)?;
    let text = String::from_utf8(buf).expect("CSV is UTF-8");
    let mut lines = text.lines();
    let columns = lines.next().unwrap_or_default().to_string();
    out.csv("thinshell_survival", &columns, &lines.map(str::to_string).collect::<Vec<_>>())?;
    // the Chebyshev link needs a finite fourth moment
    let link = if a.r > 4.0 { Some(chebyshev_link_norms(&norms, a.n, Some(alpha_p_fnr(a.n, a.r, 4.0)?))?) } else { None };
    let passes = link.as_ref().map(|l| l.holds(report.upper - report.epsilon));
    out.json("thinshell", passes, None, &json!({ "n": a.n, "r": a.r, "thin_shell": report, "chebyshev": link }))?;
    println!("epsilon_hat = {} [{}, {}]", report.epsilon, report.lower, report.upper);
    Ok(passes.unwrap_or(true))
}

fn bodies(a: &BodiesArgs, out: &mut Artifacts) -> Result<bool, CliError> {
    let calib = load_calib(&a.common, &a.calib)?;
    let model = model(a.n, a.r, a.cond)?;
    let alpha = model.alpha();
    let dirs = direction_set(a.n, a.directions, stream(&a.common, 0));
    let inclusion = ka_inclusion_check(&model, a.a, a.b, &dirs)?;
    let mut passes = inclusion.passes(a.tol);
    // convexity is only claimed up to α − 1
    let convexity = if a.a <= alpha - 1.0 {
        let rep = ka_convexity_check(&model, a.a, a.trials, stream(&a.common, 1))?;
        passes &= rep.passes(a.tol);
        Some(rep)
    } else {
        None
    };
    let (distance, constants) = if a.n <= 2 && a.r >= a.n as f64 + 1.0 {
        let c = calib.value(calib::KA_DISTANCE_C)?;
        let rep = ka_distance_comparison(&model, a.n as f64, a.directions, stream(&a.common, 2), None)?;
        passes &= rep.passes(c);
        (Some(rep), Some(used(&calib, &[calib::KA_DISTANCE_C])?))
    } else {
        (None, None)
    };
    let mut lines = Vec::with_capacity(dirs.len());
    for (i, theta) in dirs.iter().enumerate() {
        let coords: Vec<String> = theta.iter().map(f64::to_string).collect();
        lines.push(format!("{i},{},{},{}", coords.join(","), ka_radial(&model, a.a, theta)?, ka_radial(&model, a.b, theta)?));
    }
    let xs: Vec<String> = (0..a.n).map(|i| format!("x{i}")).collect();
    out.csv("bodies_radial", &format!("index,{},rho_a,rho_b", xs.join(",")), &lines)?;
    out.json(
        "bodies-check",
        Some(passes),
        constants,
        &json!({ "inclusion": inclusion, "convexity": convexity, "distance": distance }),
    )?;
    Ok(passes)
}

fn concavity(a: &ConcavityArgs, out: &mut Artifacts) -> Result<bool, CliError> {
    load_calib(&a.common, &a.calib)?;
    let cfg = QuadConfig::default();
    let base = stream(&a.common, 0);
    let mut lines = Vec::new();
    let mut passes = true;
    let mut worst = f64::NEG_INFINITY;
    for (i, &alpha) in a.alpha.iter().enumerate() {
        for j in 0..a.profiles {
            let mut rng = base.substream((i * a.profiles + j) as u64).rng();
            let phi = PiecewiseLinearConvex::random(&mut rng, a.max_pieces);
            let h = h_transform(&phi.power_profile(alpha), alpha, &default_p_grid(alpha, 0.0), &cfg)?;
            let v = h.max_violation();
            let ok = v.passes(a.tol);
            passes &= ok;
            worst = worst.max(v.max_violation);
            lines.push(format!("{alpha},{j},{},{}", v.max_violation, verdict(ok)));
        }
    }
    out.csv("concavity", "alpha,profile,max_violation,passes", &lines)?;
    out.json("concavity-check", Some(passes), None, &json!({ "profiles": lines.len(), "worst_violation": worst }))?;
    Ok(passes)
}

fn khinchine(a: &KhinchineArgs, out: &mut Artifacts) -> Result<bool, CliError> {
    load_calib(&a.common, &a.calib)?;
    let model = model(a.n, a.r, a.cond)?;
    let dirs = direction_set(a.n, a.directions, stream(&a.common, 0));
    let mc = stream(&a.common, 1);
    let mut reports = Vec::with_capacity(dirs.len());
    let mut lines = Vec::with_capacity(dirs.len());
    for (i, theta) in dirs.iter().enumerate() {
        let rep = khinchine_check(&model, &Functional::Direction(theta.clone()), a.p, a.q, Some((mc.substream(i as u64), 200_000)))?;
        lines.push(format!(
            "{i},{},{},{},{},{},{},{},{}",
            rep.p, rep.q, rep.lhs, rep.rhs, rep.rhs_unnormalized, rep.support_mass, rep.std_error, verdict(rep.passes)
        ));
        reports.push(rep);
    }
    let passes = reports.iter().all(|r| r.passes);
    out.csv("khinchine", "direction,p,q,lhs,rhs,rhs_unnormalized,support_mass,std_error,passes", &lines)?;
    out.json("khinchine", Some(passes), None, &reports)?;
    Ok(passes)
}

fn polar_moment(a: &PolarMomentArgs, out: &mut Artifacts) -> Result<bool, CliError> {
    load_calib(&a.common, &a.calib)?;
    let model = model(a.n, a.r, a.cond)?;
    let base = stream(&a.common, 0);
    let mut reports = Vec::new();
    for &k in &a.k {
        let ctx = HkpContext::new(&model, k)?;
        for &p in &a.p {
            reports.push(polar_moment_check(&ctx, p, a.rotations, a.samples, base.substream(reports.len() as u64))?);
        }
    }
    let lines: Vec<String> = reports
        .iter()
        .map(|r| {
            format!(
                "{},{},{},{},{},{},{},{}",
                r.k, r.p, r.lhs, r.lhs_std_error, r.rhs, r.rhs_std_error, r.rel_error, verdict(r.passes)
            )
        })
        .collect();
    let passes = reports.iter().all(|r| r.passes);
    out.csv("polar_moment", "k,p,lhs,lhs_std_error,rhs,rhs_std_error,rel_error,passes", &lines)?;
    out.json("polar-moment", Some(passes), None, &reports)?;
    Ok(passes)
}

fn reverse_holder(a: &ReverseHolderArgs, out: &mut Artifacts) -> Result<bool, CliError> {
    let calib = load_calib(&a.common, &a.calib)?;
    let c_hat = calib.value(calib::REVERSE_HOLDER_C)?;
    let model = model(a.n, a.r, a.cond)?;
    let base = stream(&a.common, 0);
    let mut reports = Vec::new();
    for &k in &a.k {
        let ctx = HkpContext::new(&model, k)?;
        for &p in &a.p {
            reports.push(reverse_holder_check(&ctx, p, a.rotations, a.pairs, c_hat, base.substream(reports.len() as u64))?);
        }
    }
    let lines: Vec<String> = reports
        .iter()
        .map(|r| format!("{},{},{},{},{},{},{},{}", r.k, r.p, r.ratio, r.l_hat, r.c_hat, r.bound, r.margin, verdict(r.passes)))
        .collect();
    let passes = reports.iter().all(|r| r.passes);
    out.csv("reverse_holder", "k,p,ratio,l_hat,c_hat,bound,margin,passes", &lines)?;
    out.json("reverse-holder", Some(passes), Some(used(&calib, &[calib::REVERSE_HOLDER_C])?), &reports)?;
    Ok(passes)
}

fn loglip(a: &LoglipArgs, out: &mut Artifacts) -> Result<bool, CliError> {
    let calib = load_calib(&a.common, &a.calib)?;
    let big_c = calib.value(calib::LOGLIP_C)?;
    let mut points = Vec::new();
    for &n in &a.n {
        for &k in &a.k {
            if k >= n {
                return Err(CliError::Usage(format!("field `k`: k = {k} must be below n = {n}")));
            }
            for &p in &a.p {
                for &condition in &a.cond {
                    points.push(LipGridPoint { n, k, p, condition });
                }
            }
        }
    }
    let values = loglip_grid(&points, a.r, a.pairs, stream(&a.common, 0))?;
    let mut passes = true;
    let mut lines = Vec::with_capacity(values.len());
    for v in &values {
        let pt = v.point;
        let bound = big_c * (pt.k as f64).max(pt.p).powi(2) * pt.condition;
        let ok = v.l_hat <= bound;
        passes &= ok;
        lines.push(format!("{},{},{},{},{},{},{bound},{}", pt.n, pt.k, pt.p, pt.condition, v.l_hat, v.envelope_ratio, verdict(ok)));
    }
    out.csv("loglip", "n,k,p,condition,l_hat,envelope_ratio,bound,passes", &lines)?;
    out.json("loglip", Some(passes), Some(used(&calib, &[calib::LOGLIP_C])?), &values)?;
    Ok(passes)
}

fn calibrate(a: &CalibrateArgs, out: &mut Artifacts) -> Result<bool, CliError> {
    let path: PathBuf = a.output.clone().unwrap_or_else(|| out.dir().join("calibration.json"));
    if path.exists() {
        return Err(CliError::Usage(format!("{} exists; calibration files are never overwritten", path.display())));
    }
    let run_id = format!("config_hash={} seed={}", out.hash(), a.common.seed);
    let constants = run_calibration(a.common.seed, &run_id)?;
    constants.save(&path)?;
    println!("wrote {}", path.display());
    let lines: Vec<String> = constants.entries().map(|e| format!("{},{}", e.name, e.value)).collect();
    out.csv("calibration_constants", "name,value", &lines)?;
    out.json("calibrate", None, None, &constants)?;
    Ok(true)
}

fn report(out: &mut Artifacts) -> Result<bool, CliError> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(out.dir())?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    let mut lines = Vec::new();
    let mut passes = true;
    for path in files {
        let name = path.file_name().unwrap_or_default().to_string_lossy().into_owned();
        if name == "report.json" {
            continue;
        }
        let Ok(doc) = serde_json::from_str::<Value>(&std::fs::read_to_string(&path)?) else { continue };
        let (Some(exp), Some(hash)) = (doc["experiment"].as_str(), doc["config_hash"].as_str()) else { continue };
        let status = match doc["passes"].as_bool() {
            Some(ok) => {
                passes &= ok;
                verdict(ok)
            }
            None => "n/a",
        };
        lines.push(format!("{name},{exp},{hash},{},{status}", doc["seed"]));
    }
    println!("{:<28} {:<16} {:<17} {:>6}  status", "artifact", "experiment", "config_hash", "seed");
    for line in &lines {
        let f: Vec<&str> = line.split(',').collect();
        println!("{:<28} {:<16} {:<17} {:>6}  {}", f[0], f[1], f[2], f[3], f[4]);
    }
    out.csv("report", "artifact,experiment,config_hash,seed,passes", &lines)?;
    out.json("report", Some(passes), None, &json!({ "artifacts": lines.len() }))?;
    Ok(passes)
}
