use std::f64::consts::PI;
use std::fmt::Write as _;

use anyhow::{bail, Result};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use slevolve_core::affine::{
    beta_closed, classify_affine_case, integrate_affine, translation_defect, AffineCase,
    AffineParams,
};
use slevolve_core::centred::{
    beta_limits, betas, classify_case, classify_topology, escape_times, integrate_w,
    period_from_ode, periodic_search, rationalize, turning_points, verify_periodic, Case,
    CentredParams, Family, SearchOptions, Signature,
};
use slevolve_core::evodata::EvolutionData;
use slevolve_core::evolver::{integrate, EvolMap, EvolveOptions};
use slevolve_core::meshverify::{
    affine_family, centred_family, cone_mesh, cone_residuals, sl_residuals, ClosedFamily, Mesh,
    Projection, SLReport, Tangents,
};
use slevolve_core::threefold::{conformal_map, cross_section, Affine3, Affine3Variant};

use crate::args::*;
use crate::config::{envelope, read_text, require, usage};

/// Text to emit, its file extension, and the exit status.
pub struct Outcome {
    pub text: String,
    pub ext: &'static str,
    pub status: u8,
}

impl Outcome {
    fn json(command: &str, config: &impl Serialize, result: &impl Serialize) -> Result<Self> {
        Ok(Outcome {
            text: envelope(command, config, result)?,
            ext: "json",
            status: 0,
        })
    }

    fn plain(text: String, ext: &'static str) -> Self {
        Outcome {
            text,
            ext,
            status: 0,
        }
    }
}

pub struct Ctx {
    pub quiet: bool,
}

impl Ctx {
    fn progress(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }
}

fn pairs(zs: &[Complex64]) -> Vec<[f64; 2]> {
    zs.iter().map(|z| [z.re, z.im]).collect()
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![a],
        _ => (0..n)
            .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

fn span(v: &[f64], flag: &str) -> Result<(f64, f64)> {
    match v {
        [a, b] if a.is_finite() && b.is_finite() && a < b => Ok((*a, *b)),
        _ => usage(format!("--{flag} needs start,end with start < end")),
    }
}

fn case_name(c: Case) -> &'static str {
    match c {
        Case::A => "a",
        Case::B => "b",
        Case::C => "c",
        Case::D => "d",
    }
}

fn case_description(c: Case) -> &'static str {
    match c {
        Case::A => "A = 0: contained in a special Lagrangian plane",
        Case::B => "a = m: ellipsoids escaping to infinity in both directions",
        Case::C => "A = A_max: u constant, phases rotating linearly",
        Case::D => "generic: u and theta periodic with period T",
    }
}

impl Centred {
    fn signature(&self) -> Result<Signature> {
        let a = require(&self.a, "a")?;
        let alphas = require(&self.alphas, "alphas")?;
        if let Some(m) = self.m {
            if m != alphas.len() {
                return usage(format!("--m {m} but {} alphas given", alphas.len()));
            }
        }
        Ok(Signature::new(a, alphas)?)
    }

    fn centred_params(&self) -> Result<CentredParams> {
        let sig = self.signature()?;
        Ok(CentredParams::new(
            sig.a,
            sig.alphas,
            require(&self.big_a, "A")?,
            self.c,
        )?)
    }
}

// ---------------------------------------------------------------------------
// evolve

pub fn evolve(mut args: Evolve, ctx: &Ctx) -> Result<Outcome> {
    let opts = args.ode.options();
    if args.steps == 0 {
        return usage("--steps must be positive");
    }
    if let Some(path) = args.data.clone() {
        let data = EvolutionData::from_json(&read_text(&path, "evolution data")?)?;
        let phi0 = match (&args.phi0, &args.w0) {
            (Some(p), _) => {
                let map: EvolMap = serde_json::from_str(&read_text(p, "initial map")?)
                    .map_err(|e| crate::config::Usage(format!("initial map: {e}")))?;
                EvolMap::new(map.m, map.n, map.a, map.t0)?
            }
            (None, Some(w)) => EvolMap::diagonal(&w.0),
            (None, None) => EvolMap::diagonal(&vec![Complex64::new(1.0, 0.0); data.n]),
        };
        let t_end = *args.t_end.get_or_insert(10.0);
        let eo = EvolveOptions {
            ode: opts,
            steps: args.steps,
            samples: args.samples,
            seed: args.seed,
            ..EvolveOptions::default()
        };
        ctx.progress(format!("integrating the general flow to t = {t_end}"));
        let tr = integrate(&phi0, &data, t_end, &eo)?;
        if let Some(t) = tr.escaped {
            ctx.progress(format!("escaped at t = {t}"));
        }
        return match args.format {
            TableFormat::Csv => Ok(Outcome::plain(tr.to_csv(), "csv")),
            TableFormat::Json => Outcome::json(
                "evolve",
                &args,
                &json!({ "mode": "general", "trajectory": tr }),
            ),
        };
    }
    let (a, w0, case) = match &args.w0 {
        Some(w) => (require(&args.params.a, "a")?, w.0.clone(), None),
        None => {
            let p = args.params.centred_params()?;
            let case = classify_case(&p)?;
            (p.a, p.initial_w()?, Some(case))
        }
    };
    if let Some(m) = args.params.m {
        if m != w0.len() {
            return usage(format!("--m {m} but {} letters", w0.len()));
        }
    }
    let t_end = match args.t_end {
        Some(t) => t,
        None if case == Some(Case::D) => betas(&args.params.centred_params()?)?.period,
        None => 10.0,
    };
    args.t_end = Some(t_end);
    let times = linspace(0.0, t_end, args.steps + 1);
    ctx.progress(format!("integrating the w-system to t = {t_end}"));
    let tr = integrate_w(a, &w0, &times, opts)?;
    let invariant = |w: &[Complex64]| w.iter().fold(Complex64::new(1.0, 0.0), |acc, z| acc * z).im;
    let a0 = invariant(&w0);
    let drift =
        tr.w.iter()
            .map(|w| (invariant(w) - a0).abs())
            .fold(0.0, f64::max);
    if let Some(t) = tr.escaped {
        ctx.progress(format!("escaped at t = {t}"));
    }
    match args.format {
        TableFormat::Csv => {
            let m = w0.len();
            let mut head = vec!["t".to_string()];
            head.extend((1..=m).flat_map(|j| [format!("re_w{j}"), format!("im_w{j}")]));
            head.extend((1..=m).map(|j| format!("theta{j}")));
            let mut s = head.join(",") + "\n";
            for (i, t) in tr.times.iter().enumerate() {
                let mut row = vec![*t];
                row.extend(tr.w[i].iter().flat_map(|z| [z.re, z.im]));
                row.extend(&tr.thetas[i]);
                let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
                s.push_str(&cells.join(","));
                s.push('\n');
            }
            Ok(Outcome::plain(s, "csv"))
        }
        TableFormat::Json => {
            let result = json!({
                "mode": "centred",
                "case": case.map(case_name),
                "A": a0,
                "invariant_drift": drift,
                "escaped": tr.escaped,
                "times": tr.times,
                "w": tr.w.iter().map(|w| pairs(w)).collect::<Vec<_>>(),
                "thetas": tr.thetas,
                "stats": tr.stats,
            });
            Outcome::json("evolve", &args, &result)
        }
    }
}

// ---------------------------------------------------------------------------
// betas, limits

pub fn betas_cmd(args: Betas, ctx: &Ctx) -> Result<Outcome> {
    let p = args.params.centred_params()?;
    let case = classify_case(&p)?;
    if case != Case::D {
        return usage(format!(
            "phase advances need case (d); these parameters are in case ({})",
            case_name(case)
        ));
    }
    let r = betas(&p)?;
    let sum: f64 = r.betas.iter().sum();
    let mut result = json!({
        "case": case_name(case),
        "A_max": p.signature().a_max(),
        "betas": r.betas,
        "betas_over_pi": r.betas.iter().map(|b| b / PI).collect::<Vec<_>>(),
        "sum_of_betas": sum,
        "period": r.period,
        "turning_points": [r.gamma, r.delta],
        "quadrature_error_estimate": r.error_estimate,
    });
    if args.check_ode {
        ctx.progress("measuring the period from the w-system");
        let o = period_from_ode(&p, args.ode.options())?;
        let diff = o
            .betas
            .iter()
            .zip(&r.betas)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        result["ode_check"] = json!({
            "period": o.period,
            "betas": o.betas,
            "max_beta_difference": diff,
            "period_difference": (o.period - r.period).abs(),
            "invariant_drift": o.invariant_drift,
        });
    }
    Outcome::json("betas", &args, &result)
}

pub fn limits(args: Limits) -> Result<Outcome> {
    let a = require(&args.a, "a")?;
    let alphas = require(&args.alphas, "alphas")?;
    if args.m.is_some_and(|m| m != alphas.len()) {
        return usage("--m does not match the number of alphas");
    }
    let sig = Signature::new(a, alphas)?;
    let mut result = serde_json::to_value(beta_limits(&sig)?)?;
    result["A_max"] = json!(sig.a_max());
    Outcome::json("limits", &args, &result)
}

// ---------------------------------------------------------------------------
// search

pub fn search(args: Search, ctx: &Ctx) -> Result<Outcome> {
    let family = match args.family {
        FamilyKind::Sym | FamilyKind::Line if (args.m, args.a) != (3, 1) => {
            return usage("the sym and line families have m = 3, a = 1");
        }
        FamilyKind::Sym => Family::Sym,
        FamilyKind::Line => Family::Line {
            s_min: args.s_min,
            s_max: args.s_max,
        },
        FamilyKind::Fixed => {
            let alphas = require(&args.alphas, "alphas")?;
            if alphas.len() != args.m {
                return usage(format!("--m {} but {} alphas given", args.m, alphas.len()));
            }
            Family::Fixed { a: args.a, alphas }
        }
    };
    let opts = SearchOptions {
        b_max: args.bmax,
        tol: args.tol,
        grid: args.grid,
        s_grid: args.s_grid,
    };
    ctx.progress(format!(
        "scanning {:?} with b <= {}",
        args.family, args.bmax
    ));
    let sols = periodic_search(&family, &opts)?;
    ctx.progress(format!(
        "{} candidates; re-verifying with the w-system",
        sols.len()
    ));
    let ode = args.ode.options();
    let checked: Vec<Value> = sols
        .par_iter()
        .map(|s| {
            let residual = verify_periodic(s, args.verify_samples, ode)?;
            let topology = classify_topology(s.m, s.a, &s.numerators, args.c)?;
            Ok(json!({
                "solution": s,
                "betas_over_pi": s.betas.iter().map(|b| b / PI).collect::<Vec<_>>(),
                "topology": topology,
                "reverify": { "sign_relation_residual": residual, "passed": residual <= args.verify_tol },
            }))
        })
        .collect::<Result<_>>()?;
    let all = checked
        .iter()
        .all(|c| c["reverify"]["passed"] == json!(true));
    if sols.is_empty() {
        ctx.progress("no periodic parameters found");
    }
    let result = json!({ "count": checked.len(), "all_verified": all, "solutions": checked });
    Outcome::json("search", &args, &result)
}

// ---------------------------------------------------------------------------
// mesh, verify

fn affine_params(s: &Surface) -> Result<AffineParams> {
    let p = &s.params;
    let alphas = require(&p.alphas, "alphas")?;
    if p.m.is_some_and(|m| m != alphas.len() + 1) {
        return usage("paraboloids in C^m take m - 1 alphas");
    }
    Ok(AffineParams::new(
        require(&p.a, "a")?,
        alphas,
        require(&p.big_a, "A")?,
        s.c_const.0,
    )?)
}

fn affine3(s: &Surface) -> Result<Affine3> {
    let w = require(&s.w0, "w0")?.0;
    if w.len() != 2 {
        return usage("--w0 needs w_1;w_2 for the closed-form family");
    }
    let v = match s.variant {
        Variant::A2 => Affine3Variant::A2,
        Variant::A1 => Affine3Variant::A1,
    };
    Ok(Affine3::from_initial(v, w[0], w[1], s.beta0.0)?)
}

fn cone_params(s: &Surface) -> Result<CentredParams> {
    let sig = s.params.signature()?;
    if (sig.m(), sig.a) != (3, 1) {
        return usage("cones are built for m = 3, a = 1");
    }
    Ok(CentredParams::new(
        1,
        sig.alphas,
        require(&s.params.big_a, "A")?,
        0.0,
    )?)
}

fn cone_grid(
    s: &Surface,
    ns: usize,
    nt: usize,
    ode: &Ode,
) -> Result<slevolve_core::threefold::ConformalGrid> {
    let p = cone_params(s)?;
    let cs = cross_section([p.alphas[0], p.alphas[1], p.alphas[2]])?;
    let (t0, t1) = span(&s.t_span, "t-span")?;
    Ok(conformal_map(
        &p,
        &linspace(0.0, cs.period()?, ns),
        &linspace(t0, t1, nt),
        ode.options(),
    )?)
}

pub fn mesh(args: MeshCmd, ctx: &Ctx) -> Result<Outcome> {
    let s = &args.surface;
    let (t0, t1) = span(&s.t_span, "t-span")?;
    if args.nt < 2 || args.res == 0 {
        return usage("--nt must be at least 2 and --res positive");
    }
    let times = linspace(t0, t1, args.nt);
    let ode = args.ode.options();
    ctx.progress(format!("building {:?} mesh", s.kind));
    let mut mesh: Mesh = match s.kind {
        SurfaceKind::Centred => {
            let p = s.params.centred_params()?;
            centred_family(&p, s.params.c, &times, s.radius, ode)?.mesh(args.res)?
        }
        SurfaceKind::Affine => {
            affine_family(&affine_params(s)?, &times, s.radius, ode)?.mesh(args.res)?
        }
        SurfaceKind::CaseC => {
            let p = s.params.centred_params()?;
            ClosedFamily::case_c(&p, s.params.c, s.radius)?.mesh(&times, args.res)?
        }
        SurfaceKind::Affine3 => {
            ClosedFamily::affine3(affine3(s)?, s.radius)?.mesh(&times, args.res)?
        }
        SurfaceKind::Cone => {
            let grid = cone_grid(s, args.res + 1, args.nt, &args.ode)?;
            let radii = linspace(s.radius / args.res as f64, s.radius, args.res);
            cone_mesh(&grid, &radii)?
        }
    };
    if let Some(t) = mesh.truncated_at {
        ctx.progress(format!("evolution escaped at t = {t}; mesh truncated"));
    }
    if let Some(r) = mesh.analytic_report() {
        ctx.progress(format!(
            "{} vertices, max residual {:.3e} (omega {:.3e}, Im Omega {:.3e})",
            mesh.vertices.len(),
            r.max_residual(),
            r.max_omega_residual,
            r.max_im_omega_residual
        ));
    }
    let proj = args
        .projection
        .as_deref()
        .map(str::parse::<Projection>)
        .transpose()?;
    Ok(match args.format {
        MeshFormat::Json => {
            mesh.provenance = Some(json!({
                "program": "slevolve",
                "version": slevolve_core::VERSION,
                "command": "mesh",
                "config": &args,
            }));
            Outcome::plain(mesh.to_json()?, "json")
        }
        MeshFormat::Obj => Outcome::plain(mesh.to_obj(proj.as_ref())?, "obj"),
        MeshFormat::Ply => Outcome::plain(mesh.to_ply(proj.as_ref())?, "ply"),
        MeshFormat::Csv => Outcome::plain(mesh.to_csv(), "csv"),
    })
}

pub fn verify(args: Verify, ctx: &Ctx) -> Result<Outcome> {
    let ode = args.ode.options();
    let (source, tangents, report): (String, &str, SLReport) = match &args.mesh {
        Some(path) => {
            let mesh = Mesh::from_json(&read_text(path, "mesh")?)?;
            let stored = if args.fd {
                None
            } else {
                mesh.analytic_report()
            };
            match stored {
                Some(r) => (mesh.label.clone(), "analytic", r),
                None => (mesh.label.clone(), "finite-difference", mesh.fd_report()?),
            }
        }
        None => {
            let s = &args.surface;
            let (t0, t1) = span(&s.t_span, "t-span")?;
            ctx.progress(format!("sampling {:?} at {} points", s.kind, args.samples));
            let r = match s.kind {
                SurfaceKind::Centred => {
                    let p = s.params.centred_params()?;
                    centred_family(&p, s.params.c, &linspace(t0, t1, 41), s.radius, ode)?
                        .residuals(args.samples, args.seed)?
                }
                SurfaceKind::Affine => {
                    affine_family(&affine_params(s)?, &linspace(t0, t1, 41), s.radius, ode)?
                        .residuals(args.samples, args.seed)?
                }
                SurfaceKind::CaseC => {
                    let fam =
                        ClosedFamily::case_c(&s.params.centred_params()?, s.params.c, s.radius)?;
                    sl_residuals(
                        &fam,
                        &fam.random_samples((t0, t1), args.samples, args.seed),
                        Tangents::Analytic,
                    )?
                }
                SurfaceKind::Affine3 => {
                    let fam = ClosedFamily::affine3(affine3(s)?, s.radius)?;
                    sl_residuals(
                        &fam,
                        &fam.random_samples((t0, t1), args.samples, args.seed),
                        Tangents::Analytic,
                    )?
                }
                SurfaceKind::Cone => {
                    let n = (args.samples as f64).sqrt().ceil() as usize;
                    cone_residuals(&cone_grid(s, n.max(2), n.max(2), &args.ode)?, s.radius)
                }
            };
            (format!("{:?}", s.kind).to_lowercase(), "analytic", r)
        }
    };
    let max = report.max_residual();
    let passed = max <= args.threshold;
    eprintln!(
        "max residual {max:.3e} ({} samples, {} skipped): {} threshold {:.1e}",
        report.sample_count,
        report.skipped,
        if passed { "within" } else { "EXCEEDS" },
        args.threshold
    );
    let result = json!({
        "source": source,
        "tangents": tangents,
        "report": report,
        "max_residual": max,
        "threshold": args.threshold,
        "passed": passed,
    });
    let mut out = Outcome::json("verify", &args, &result)?;
    if !passed {
        out.status = 3;
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// crosssection, affine

pub fn crosssection(args: Crosssection, ctx: &Ctx) -> Result<Outcome> {
    let alphas: [f64; 3] = require(&args.alphas, "alphas")?
        .try_into()
        .map_err(|_| crate::config::Usage("--alphas needs three values".into()))?;
    if args.samples < 2 {
        return usage("--samples must be at least 2");
    }
    let cs = cross_section(alphas)?;
    let period = cs.period()?;
    let ss = linspace(0.0, period, args.samples);
    let mut rows = Vec::with_capacity(ss.len());
    let (mut constraint, mut ode_res): (f64, f64) = (0.0, 0.0);
    for &s in &ss {
        let p = cs.at(s)?;
        let (e, q) = cs.constraint_residuals(s)?;
        constraint = constraint.max(e).max(q);
        ode_res = ode_res.max(cs.ode_residual_fd(s, 1e-5)?);
        rows.push((s, p.x, p.dx, cs.v(s)?));
    }
    if args.format == TableFormat::Csv {
        let mut out = String::from("s,x1,x2,x3,dx1,dx2,dx3,v\n");
        for (s, x, dx, v) in &rows {
            let cells: Vec<String> = std::iter::once(*s)
                .chain(x.iter().copied())
                .chain(dx.iter().copied())
                .chain(std::iter::once(*v))
                .map(|c| format!("{c:.16e}"))
                .collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        return Ok(Outcome::plain(out, "csv"));
    }
    let conformal = match args.big_a {
        Some(big_a) => {
            let (t0, t1) = span(&args.t_span, "t-span")?;
            ctx.progress("evaluating the conformal cone map");
            let p = CentredParams::new(1, alphas.to_vec(), big_a, 0.0)?;
            let grid = conformal_map(
                &p,
                &ss,
                &linspace(t0, t1, args.nt.max(2)),
                args.ode.options(),
            )?;
            Some(grid.report())
        }
        None => None,
    };
    let result = json!({
        "alphas": alphas,
        "mu": cs.mu,
        "nu": cs.nu,
        "swapped": cs.swapped,
        "gamma": cs.gamma,
        "period": period,
        "max_constraint_residual": constraint,
        "max_ode_residual": ode_res,
        "curve": rows.iter().map(|(s, x, dx, v)| json!({"s": s, "x": x, "dx": dx, "v": v})).collect::<Vec<_>>(),
        "conformal": conformal,
    });
    Outcome::json("crosssection", &args, &result)
}

pub fn affine(mut args: Affine, ctx: &Ctx) -> Result<Outcome> {
    let alphas = require(&args.alphas, "alphas")?;
    if args.m.is_some_and(|m| m != alphas.len() + 1) {
        return usage("paraboloids in C^m take m - 1 alphas");
    }
    let p = AffineParams::new(
        require(&args.a, "a")?,
        alphas,
        require(&args.big_a, "A")?,
        args.c_const.0,
    )?;
    if args.steps == 0 {
        return usage("--steps must be positive");
    }
    let case = classify_affine_case(&p)?;
    let opts = args.ode.options();
    let period = match case {
        AffineCase::D => Some(betas(&p.centred()?)?.period),
        _ => None,
    };
    let t_end = *args.t_end.get_or_insert(period.map_or(5.0, |t| 5.0 * t));
    ctx.progress(format!("integrating the paraboloid flow to t = {t_end}"));
    let s0 = p.initial_state()?;
    let tr = integrate_affine(p.a, &s0, &linspace(0.0, t_end, args.steps + 1), opts)?;
    if args.format == TableFormat::Csv {
        return Ok(Outcome::plain(tr.to_csv(), "csv"));
    }
    let u = tr.u(&p.alphas);
    let law = tr
        .times
        .iter()
        .enumerate()
        .map(|(k, t)| (tr.beta[k] - beta_closed(u[k], u[0], *t, p.big_a, s0.beta)).norm())
        .fold(0.0, f64::max);
    let translation = match period {
        Some(_) => {
            let (t, defect) = translation_defect(&p, opts)?;
            Some(json!({ "period": t, "shift": [0.0, -p.big_a * t], "defect": defect }))
        }
        None => None,
    };
    let result = json!({
        "case": match case {
            AffineCase::A => "a",
            AffineCase::B { .. } => "b",
            AffineCase::C => "c",
            AffineCase::D => "d",
        },
        "finite_interval": match case {
            AffineCase::B { finite_interval } => Some(finite_interval),
            _ => None,
        },
        "description": case.description(),
        "escaped": tr.escaped,
        "beta_law_residual": law,
        "translation": translation,
        "times": tr.times,
        "w": tr.w.iter().map(|w| pairs(w)).collect::<Vec<_>>(),
        "beta": pairs(&tr.beta),
        "u": u,
        "thetas": tr.thetas,
    });
    Outcome::json("affine", &args, &result)
}

// ---------------------------------------------------------------------------
// report

pub fn report(args: Report, ctx: &Ctx) -> Result<Outcome> {
    let p = args.params.centred_params()?;
    let sig = p.signature();
    let case = classify_case(&p)?;
    let normalized = sig.is_normalized();
    let mut r = json!({
        "m": p.m,
        "a": p.a,
        "alphas": p.alphas,
        "A": p.big_a,
        "c": p.c,
        "case": case_name(case),
        "description": case_description(case),
        "normalization_residual": sig.normalization_residual(),
        "u_range": sig.u_range(),
    });
    if normalized && p.a < p.m {
        r["A_max"] = json!(sig.a_max());
        r["limits"] = serde_json::to_value(beta_limits(&sig)?)?;
    }
    if case == Case::D {
        let (gamma, delta) = turning_points(&sig, p.big_a)?;
        r["turning_points"] = json!([gamma, delta]);
        let b = betas(&p)?;
        ctx.progress("checking the quadrature against the w-system");
        let o = period_from_ode(&p, args.ode.options())?;
        let diff = o
            .betas
            .iter()
            .zip(&b.betas)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        r["period"] = json!(b.period);
        r["betas"] = json!(b.betas);
        r["betas_over_pi"] = json!(b.betas.iter().map(|x| x / PI).collect::<Vec<_>>());
        r["ode_check"] = json!({ "max_beta_difference": diff, "period_difference": (o.period - b.period).abs() });
        r["periodic"] = match rationalize(&b.betas, args.bmax, 1e-8) {
            Some((nums, den)) => json!({
                "numerators": nums,
                "b": den,
                "topology": classify_topology(p.m, p.a, &nums, p.c)?,
            }),
            None => Value::Null,
        };
    }
    if case == Case::B {
        let (back, fwd) = escape_times(&p, 50.0, args.ode.options())?;
        r["escape_times"] = json!([back, fwd]);
    }
    if p.m == 3 && p.a == 1 && normalized {
        let cs = cross_section([p.alphas[0], p.alphas[1], p.alphas[2]])?;
        r["cross_section"] =
            json!({ "mu": cs.mu, "nu": cs.nu, "swapped": cs.swapped, "period": cs.period()? });
    }
    match args.format {
        ReportFormat::Json => Outcome::json("report", &args, &r),
        ReportFormat::Md => Ok(Outcome::plain(markdown(&r)?, "md")),
    }
}

fn markdown(r: &Value) -> Result<String> {
    let mut s = String::new();
    writeln!(s, "# slevolve report\n")?;
    writeln!(s, "version {}\n", slevolve_core::VERSION)?;
    writeln!(s, "| quantity | value |")?;
    writeln!(s, "|---|---|")?;
    let Value::Object(map) = r else {
        bail!("report is not an object");
    };
    for (k, v) in map {
        let text = match v {
            Value::String(t) => t.clone(),
            other => other.to_string(),
        };
        writeln!(s, "| {k} | {} |", text.replace('|', "\\|"))?;
    }
    Ok(s)
}
