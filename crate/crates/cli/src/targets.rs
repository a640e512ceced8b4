//! Text grammar for targets and survival sets.
//!
//! Targets (the dimension is taken from the set):
//!
//! | text | log-density |
//! |------|-------------|
//! | `sin10` | `sin(10x)` on `[0,1]` |
//! | `uniform` | `0` |
//! | `exp_scaled:a` or `exp_scaled(a)` | `exp(a·(x₁+⋯+x_d))` |
//! | `poly:c1,c2,...` or `polynomial(c1,...)` | monomial coefficients in lexicographic order, degree inferred from the count |
//! | `expr:<formula>` | any formula in `x` (1D) or `x1..x8` |
//!
//! Sets:
//!
//! | text | set |
//! |------|-----|
//! | `cube` or `cube:d` | `[0,1]^d` |
//! | `interval:a,b` | `[a,b]` |
//! | `intervals:a,b;c,d` | union of intervals |
//! | `box:lo1,...;hi1,...` | axis-aligned box |
//! | `halfspace:n1,...;t` | `{x : n·x ≤ t}` |
//! | `ball:c1,...;r` | Euclidean ball |
//! | `{...}` or `@file.json` | interval-union JSON |
//!
//! Numbers may be written as fractions, e.g. `interval:0,1/2`.

use std::cell::RefCell;
use std::collections::HashMap;
use std::rc::Rc;

use truncfit_core::basis::enumerate_basis;
use truncfit_core::{LogDensity, PolyCoeffs, SurvivalSet};

use crate::error::{CliError, CliResult};

const EXPR_1D_VARS: [&str; 1] = ["x"];
const EXPR_VARS: [&str; 8] = ["x1", "x2", "x3", "x4", "x5", "x6", "x7", "x8"];
/// Grid points used to estimate `sup|f|` of a formula target.
const EXPR_BOUND_POINTS: usize = 100_001;
/// Headroom on the estimated bound so the sampler envelope holds between grid points.
const EXPR_BOUND_SLACK: f64 = 1.05;

fn split_name(text: &str) -> (&str, &str) {
    let text = text.trim();
    if let Some(open) = text.find('(') {
        if text.ends_with(')') && !text[..open].contains(':') {
            return (text[..open].trim(), &text[open + 1..text.len() - 1]);
        }
    }
    match text.split_once(':') {
        Some((name, args)) => (name.trim(), args),
        None => (text, ""),
    }
}

pub fn parse_number(s: &str) -> CliResult<f64> {
    let s = s.trim();
    let parsed = match s.split_once('/') {
        Some((a, b)) => match (a.trim().parse::<f64>(), b.trim().parse::<f64>()) {
            (Ok(a), Ok(b)) if b != 0.0 => Some(a / b),
            _ => None,
        },
        None => s.parse::<f64>().ok(),
    };
    parsed
        .filter(|v| v.is_finite())
        .ok_or_else(|| CliError::config(format!("not a finite number: {s:?}")))
}

fn parse_list(s: &str) -> CliResult<Vec<f64>> {
    s.split(',').map(parse_number).collect()
}

/// `"a,b;c,d"` → `[[a,b],[c,d]]`.
fn parse_groups(s: &str) -> CliResult<Vec<Vec<f64>>> {
    s.split(';').map(parse_list).collect()
}

fn two_groups<'a>(groups: &'a [Vec<f64>], what: &str) -> CliResult<(&'a [f64], &'a [f64])> {
    match groups {
        [a, b] => Ok((a, b)),
        _ => Err(CliError::config(format!("{what} expects two ';'-separated groups"))),
    }
}

pub fn parse_set(text: &str) -> CliResult<SurvivalSet> {
    let text = text.trim();
    if text.starts_with('{') {
        return Ok(SurvivalSet::from_json(text)?);
    }
    if let Some(path) = text.strip_prefix('@') {
        let body =
            std::fs::read_to_string(path).map_err(|e| CliError::config(format!("cannot read set file {path}: {e}")))?;
        return Ok(SurvivalSet::from_json(&body)?);
    }
    let (name, args) = split_name(text);
    let set = match name {
        "cube" => {
            let d = if args.trim().is_empty() {
                1
            } else {
                args.trim()
                    .parse()
                    .map_err(|_| CliError::config(format!("cube dimension {args:?}")))?
            };
            SurvivalSet::cube(d)?
        }
        "interval" => match parse_list(args)?.as_slice() {
            [a, b] => SurvivalSet::interval(*a, *b)?,
            _ => return Err(CliError::config("interval expects `a,b`")),
        },
        "intervals" => {
            let iv = parse_groups(args)?
                .into_iter()
                .map(|g| match g.as_slice() {
                    [a, b] => Ok([*a, *b]),
                    _ => Err(CliError::config("intervals expects `a,b;c,d;...`")),
                })
                .collect::<CliResult<Vec<_>>>()?;
            SurvivalSet::intervals(iv)?
        }
        "box" => {
            let groups = parse_groups(args)?;
            let (lo, hi) = two_groups(&groups, "box")?;
            SurvivalSet::boxed(lo.to_vec(), hi.to_vec())?
        }
        "halfspace" => {
            let groups = parse_groups(args)?;
            match two_groups(&groups, "halfspace")? {
                (normal, [t]) => SurvivalSet::halfspace(normal.to_vec(), *t)?,
                _ => return Err(CliError::config("halfspace expects `n1,...,nd;offset`")),
            }
        }
        "ball" => {
            let groups = parse_groups(args)?;
            match two_groups(&groups, "ball")? {
                (center, [r]) => SurvivalSet::ball(center.to_vec(), *r)?,
                _ => return Err(CliError::config("ball expects `c1,...,cd;radius`")),
            }
        }
        other => return Err(CliError::config(format!("unknown set kind {other:?}"))),
    };
    Ok(set)
}

/// A named target log-density.
#[derive(Clone, Debug)]
pub enum Target {
    Sin10,
    Uniform { d: usize },
    ExpScaled { d: usize, a: f64 },
    Poly(PolyCoeffs),
    Expr { d: usize, formula: String },
}

impl Target {
    pub fn parse(text: &str, d: usize) -> CliResult<Self> {
        let (name, args) = split_name(text);
        let target = match name {
            "sin10" => {
                if d != 1 {
                    return Err(CliError::config(format!(
                        "sin10 is one-dimensional, the set has d = {d}"
                    )));
                }
                Target::Sin10
            }
            "uniform" | "zero" => Target::Uniform { d },
            "exp_scaled" => Target::ExpScaled {
                d,
                a: parse_number(args)?,
            },
            "poly" | "polynomial" => Target::Poly(poly_from_list(&parse_list(args)?, d)?),
            "expr" => {
                let formula = args.trim().to_string();
                compile(&formula, d)?;
                Target::Expr { d, formula }
            }
            other => {
                return Err(CliError::config(format!(
                    "unknown target {other:?} (expected sin10, uniform, exp_scaled, poly, expr)"
                )))
            }
        };
        Ok(target)
    }

    pub fn log_density(&self) -> CliResult<LogDensity> {
        Ok(match self {
            Target::Sin10 => LogDensity::sin10(),
            Target::Uniform { d } => LogDensity::zero(*d)?,
            Target::ExpScaled { d, a } => LogDensity::exp_scaled(*d, *a)?,
            Target::Poly(p) => LogDensity::from_poly(p),
            Target::Expr { d, formula } => expr_density(formula, *d)?,
        })
    }

    pub fn is_uniform(&self) -> bool {
        matches!(self, Target::Uniform { .. })
    }
}

fn poly_from_list(coeffs: &[f64], d: usize) -> CliResult<PolyCoeffs> {
    for k in 1..=64u32 {
        let len = enumerate_basis(d, k)?.len();
        if len == coeffs.len() {
            return Ok(PolyCoeffs::from_vec(d, k, coeffs.to_vec())?);
        }
        if len > coeffs.len() {
            break;
        }
    }
    Err(CliError::config(format!(
        "{} coefficients do not fill a complete degree in dimension {d}",
        coeffs.len()
    )))
}

type Compiled = Rc<dyn Fn(&[f64]) -> f64>;

thread_local! {
    // Compiled formulas are not `Send`, so every worker thread keeps its own.
    static COMPILED: RefCell<HashMap<(String, usize), Compiled>> = RefCell::new(HashMap::new());
}

fn compile(formula: &str, d: usize) -> CliResult<Compiled> {
    if d > EXPR_VARS.len() {
        return Err(CliError::config(format!(
            "formula targets support d <= {}",
            EXPR_VARS.len()
        )));
    }
    let key = (formula.to_string(), d);
    if let Some(f) = COMPILED.with(|c| c.borrow().get(&key).cloned()) {
        return Ok(f);
    }
    let expr: meval::Expr = formula
        .parse()
        .map_err(|e| CliError::config(format!("formula {formula:?}: {e}")))?;
    let vars: &'static [&'static str] = if d == 1 { &EXPR_1D_VARS } else { &EXPR_VARS[..d] };
    let bound = expr
        .bindn(vars)
        .map_err(|e| CliError::config(format!("formula {formula:?}: {e}")))?;
    let f: Compiled = Rc::new(bound);
    COMPILED.with(|c| c.borrow_mut().insert(key, f.clone()));
    Ok(f)
}

fn eval_formula(formula: &str, d: usize, x: &[f64]) -> f64 {
    compile(formula, d).map(|f| f(x)).unwrap_or(f64::NAN)
}

/// Formula target with `B` estimated on a lattice. The smoothness constant
/// is unknown for an arbitrary formula and is recorded as 0.
fn expr_density(formula: &str, d: usize) -> CliResult<LogDensity> {
    let per_axis = ((EXPR_BOUND_POINTS as f64).powf(1.0 / d as f64).floor() as usize).max(2);
    let total = per_axis.pow(d as u32);
    let mut sup = 0.0f64;
    let mut x = vec![0.0; d];
    for mut idx in 0..total {
        for xi in x.iter_mut() {
            *xi = (idx % per_axis) as f64 / (per_axis - 1) as f64;
            idx /= per_axis;
        }
        let v = eval_formula(formula, d, &x);
        if !v.is_finite() {
            return Err(CliError::config(format!("formula {formula:?} is not finite at {x:?}")));
        }
        sup = sup.max(v.abs());
    }
    let owned = formula.to_string();
    Ok(LogDensity::new(
        format!("expr({formula})"),
        d,
        move |x| eval_formula(&owned, d, x),
        sup * EXPR_BOUND_SLACK + 1e-9,
        0.0,
    )?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_and_fractions() {
        assert_eq!(parse_number("0.25").unwrap(), 0.25);
        assert_eq!(parse_number("1/2").unwrap(), 0.5);
        assert!(parse_number("1/0").is_err());
        assert!(parse_number("inf").is_err());
    }

    #[test]
    fn set_grammar() {
        let s = parse_set("interval:0,1/2").unwrap();
        assert_eq!(s.exact_1d().unwrap(), &[[0.0, 0.5]]);
        let s = parse_set("intervals:0,0.2;0.5,0.7").unwrap();
        assert_eq!(s.exact_1d().unwrap().len(), 2);
        assert!(parse_set("cube").unwrap().is_full_cube());
        assert_eq!(parse_set("cube:3").unwrap().dim(), 3);
        let b = parse_set("box:0,0;0.5,1").unwrap();
        assert!(b.contains(&[0.25, 0.9]) && !b.contains(&[0.75, 0.9]));
        let h = parse_set("halfspace:1,1;1").unwrap();
        assert!(h.contains(&[0.2, 0.2]) && !h.contains(&[0.9, 0.9]));
        let ball = parse_set("ball:0.5,0.5;0.25").unwrap();
        assert!(ball.contains(&[0.5, 0.6]) && !ball.contains(&[0.0, 0.0]));
        let j = parse_set(r#"{"d":1,"intervals":[[0.1,0.3]]}"#).unwrap();
        assert_eq!(j.exact_1d().unwrap(), &[[0.1, 0.3]]);
        assert!(parse_set("interval:0").is_err());
        assert!(parse_set("sphere:1").is_err());
    }

    #[test]
    fn target_grammar() {
        assert!(matches!(Target::parse("sin10", 1).unwrap(), Target::Sin10));
        assert!(Target::parse("sin10", 2).is_err());
        assert!(matches!(Target::parse("exp_scaled(0.5)", 2).unwrap(), Target::ExpScaled { d: 2, a } if a == 0.5));
        match Target::parse("poly:1,-2,3", 1).unwrap() {
            Target::Poly(p) => assert_eq!(p.basis().degree(), 3),
            t => panic!("{t:?}"),
        }
        // d = 2, degree 2 has five monomials
        match Target::parse("polynomial(1,2,3,4,5)", 2).unwrap() {
            Target::Poly(p) => assert_eq!(p.basis().degree(), 2),
            t => panic!("{t:?}"),
        }
        assert!(Target::parse("poly:1,2,3,4", 2).is_err());
        assert!(Target::parse("expr:y+1", 1).is_err());
        assert!(Target::parse("gauss", 1).is_err());
    }

    #[test]
    fn formula_target_matches_builtin() {
        let f = Target::parse("expr:sin(10*x)", 1).unwrap().log_density().unwrap();
        let g = LogDensity::sin10();
        for x in [0.0, 0.1, 0.37, 1.0] {
            assert!((f.value(&[x]) - g.value(&[x])).abs() < 1e-15);
        }
        assert!(f.bound() >= 1.0 && f.bound() <= 1.06);
        let h = Target::parse("expr:x1*x2", 2).unwrap().log_density().unwrap();
        assert!((h.value(&[0.5, 0.25]) - 0.125).abs() < 1e-15);
        let values: Vec<f64> = std::thread::scope(|s| {
            (0..4)
                .map(|i| {
                    let h = &h;
                    s.spawn(move || h.value(&[0.1 * i as f64, 1.0]))
                })
                .collect::<Vec<_>>()
                .into_iter()
                .map(|j| j.join().unwrap())
                .collect()
        });
        assert_eq!(values, vec![0.0, 0.1, 0.2, 0.30000000000000004]);
    }
}
