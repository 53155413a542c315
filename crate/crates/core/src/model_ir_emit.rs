//! Flat model IR, canonical JSON and LP text output, and instance parsing.
//!
//! JSON output is canonical: object keys sorted, finite floats printed with
//! 17 significant digits (`%.17g`), infinite bounds as the strings `"inf"` and
//! `"-inf"`. Parsing an emitted model yields the identical IR.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Map, Value};

use crate::error::{DfcError, Result};
use crate::formulation_builders::{
    Formulation, InstanceOptions, Method, MethodParams, ProblemSpec, SIMPLEX_LABEL,
};
use crate::gauge_calculus::{epi_gauge_exprs, AffExpr, Atom, Constraint, Rel, Var, VarKind, VarPool};
use crate::set_core::{CatalogFunction, SetExpr};

pub const MODEL_SCHEMA: &str = "dfc-model/1";
pub const INSTANCE_SCHEMA: &str = "dfc-instance/1";
/// Label of the rows introduced when positive-part atoms are lifted.
pub const LIFT_LABEL: &str = "extendedform";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LowerMode {
    Plus,
    Lifted,
}

impl LowerMode {
    pub fn name(self) -> &'static str {
        match self {
            LowerMode::Plus => "plus",
            LowerMode::Lifted => "lifted",
        }
    }

    pub fn parse(s: &str) -> Option<LowerMode> {
        match s {
            "plus" => Some(LowerMode::Plus),
            "lifted" => Some(LowerMode::Lifted),
            _ => None,
        }
    }
}

/// Flattened model: variables, labeled constraints, the simplex row on `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelIR {
    pub method: String,
    pub mode: LowerMode,
    pub vars: Vec<Var>,
    pub x: Vec<usize>,
    pub y: Vec<usize>,
    pub cons: Vec<Constraint>,
    pub simplex: Constraint,
    pub objective: Option<AffExpr>,
    pub provenance: Vec<String>,
    pub constants: BTreeMap<String, f64>,
}

impl ModelIR {
    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn k(&self) -> usize {
        self.y.len()
    }

    /// All atoms including the simplex row.
    pub fn atoms(&self) -> Vec<Atom> {
        self.cons.iter().map(|c| c.atom.clone()).chain(std::iter::once(self.simplex.atom.clone())).collect()
    }

    pub fn is_linear(&self) -> bool {
        self.cons.iter().all(|c| c.atom.is_linear())
    }

    pub fn count(&self, type_name: &str) -> usize {
        self.cons.iter().filter(|c| c.atom.type_name() == type_name).count()
    }

    /// Largest atom or bound violation at a full variable assignment.
    pub fn max_violation(&self, z: &[f64]) -> f64 {
        let bounds = self.vars.iter().zip(z).fold(0.0f64, |m, (v, zi)| m.max(v.lb - zi).max(zi - v.ub));
        self.cons
            .iter()
            .chain(std::iter::once(&self.simplex))
            .fold(bounds, |m, c| m.max(c.atom.violation(z)))
    }
}

/// Flattens a formulation. `Lifted` replaces every positive-part term by a
/// variable `z ≥ 0` with `z ≥ expr` and lowers the gauge at the lifted argument.
pub fn lower_model(f: &Formulation, mode: LowerMode) -> Result<ModelIR> {
    let mut pool = f.pool.clone();
    let mut cons = Vec::new();
    for c in f.blocks.iter().flat_map(|b| b.constraints.iter()) {
        match (&c.atom, mode) {
            (Atom::GaugePlus { set, terms, rhs }, LowerMode::Lifted) => {
                let n = terms.first().map(|t| t.0.len()).or_else(|| set.dim()).unwrap_or(0);
                let mut w = vec![AffExpr::zero(); n];
                for (d, e) in terms {
                    let z = pool.fresh("z", 0.0, f64::INFINITY);
                    cons.push(Constraint { atom: Atom::ge(AffExpr::var(z).minus(e), 0.0), label: LIFT_LABEL.into() });
                    for (wi, di) in w.iter_mut().zip(d) {
                        if *di != 0.0 {
                            *wi = wi.plus(&AffExpr::term(z, *di));
                        }
                    }
                }
                for atom in epi_gauge_exprs(set, &w, rhs, &mut pool)? {
                    cons.push(Constraint { atom, label: c.label.clone() });
                }
            }
            _ => cons.push(c.clone()),
        }
    }
    Ok(ModelIR {
        method: f.method.name().to_string(),
        mode,
        vars: pool.into_vars(),
        x: f.x.clone(),
        y: f.y.clone(),
        cons,
        simplex: f.simplex.clone(),
        objective: None,
        provenance: f.provenance.clone(),
        constants: f.constants.clone(),
    })
}

/// `%.17g` formatting.
pub fn fmt_g17(v: f64) -> String {
    if v == 0.0 {
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    if !v.is_finite() {
        return if v.is_nan() { "nan".into() } else if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{:.16e}", v);
    let (mant, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if !(-4..17).contains(&exp) {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{}{:02}", trim(mant), sign, exp.abs())
    } else {
        trim(&format!("{:.*}", (16 - exp) as usize, v))
    }
}

fn write_canonical(v: &Value, out: &mut String) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                let _ = write!(out, "{i}");
            } else if let Some(u) = n.as_u64() {
                let _ = write!(out, "{u}");
            } else {
                out.push_str(&fmt_g17(n.as_f64().unwrap_or(0.0)));
            }
        }
        Value::String(s) => out.push_str(&serde_json::to_string(s).expect("string serializes")),
        Value::Array(a) => {
            out.push('[');
            for (i, e) in a.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_canonical(e, out);
            }
            out.push(']');
        }
        Value::Object(m) => {
            let mut keys: Vec<&String> = m.keys().collect();
            keys.sort();
            out.push('{');
            for (i, k) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&serde_json::to_string(k).expect("key serializes"));
                out.push(':');
                write_canonical(&m[k], out);
            }
            out.push('}');
        }
    }
}

/// Canonical single-line JSON text with a trailing newline.
pub fn canonical_json(v: &Value) -> String {
    let mut s = String::new();
    write_canonical(v, &mut s);
    s.push('\n');
    s
}

pub fn ext_f64(v: f64) -> Value {
    if v == f64::INFINITY {
        json!("inf")
    } else if v == f64::NEG_INFINITY {
        json!("-inf")
    } else {
        json!(v)
    }
}

fn expr_json(e: &AffExpr) -> Value {
    json!({
        "terms": e.terms.iter().map(|(v, c)| json!([v, c])).collect::<Vec<_>>(),
        "constant": e.constant,
    })
}

fn rel_name(r: Rel) -> &'static str {
    match r {
        Rel::Le => "le",
        Rel::Eq => "eq",
        Rel::Ge => "ge",
    }
}

fn atom_json(a: &Atom) -> Value {
    match a {
        Atom::Linear { expr, rel, rhs } => json!({"type": "lin", "expr": expr_json(expr), "rel": rel_name(*rel), "rhs": rhs}),
        Atom::Soc { args, bound } => json!({
            "type": "soc",
            "args": args.iter().map(expr_json).collect::<Vec<_>>(),
            "bound": expr_json(bound),
        }),
        Atom::Perspective { f, xs, y } => json!({
            "type": "persp",
            "f": serde_json::to_value(f).expect("catalog function serializes"),
            "xs": xs.iter().map(expr_json).collect::<Vec<_>>(),
            "y": expr_json(y),
        }),
        Atom::GaugePlus { set, terms, rhs } => json!({
            "type": "gaugeplus",
            "set": serde_json::to_value(set).expect("set serializes"),
            "terms": terms.iter().map(|(d, e)| json!({"dir": d, "expr": expr_json(e)})).collect::<Vec<_>>(),
            "rhs": expr_json(rhs),
        }),
    }
}

fn constraint_json(c: &Constraint) -> Value {
    let mut v = atom_json(&c.atom);
    v["label"] = json!(c.label);
    v
}

fn kind_name(k: VarKind) -> &'static str {
    match k {
        VarKind::Continuous => "continuous",
        VarKind::Binary => "binary",
    }
}

/// Model as a JSON value; constants carry their IEEE-754 bit pattern next to
/// the decimal value.
pub fn model_value(ir: &ModelIR) -> Value {
    let constants: Map<String, Value> = ir
        .constants
        .iter()
        .map(|(k, v)| (k.clone(), json!({"value": ext_f64(*v), "bits": format!("{:016x}", v.to_bits())})))
        .collect();
    json!({
        "schema": MODEL_SCHEMA,
        "method": ir.method,
        "mode": ir.mode.name(),
        "vars": ir.vars.iter().map(|v| json!({
            "name": v.name, "kind": kind_name(v.kind), "lb": ext_f64(v.lb), "ub": ext_f64(v.ub),
        })).collect::<Vec<_>>(),
        "x": ir.x,
        "y": ir.y,
        "cons": ir.cons.iter().map(constraint_json).collect::<Vec<_>>(),
        "simplex_row": constraint_json(&ir.simplex),
        "objective": ir.objective.as_ref().map(expr_json).unwrap_or(Value::Null),
        "provenance": ir.provenance,
        "constants": constants,
    })
}

pub fn emit_json(ir: &ModelIR) -> String {
    canonical_json(&model_value(ir))
}

fn schema_err(path: &str, message: impl Into<String>) -> DfcError {
    DfcError::SchemaError { path: if path.is_empty() { ".".into() } else { path.into() }, message: message.into() }
}

fn field<'a>(v: &'a Value, key: &str, path: &str) -> Result<&'a Value> {
    v.get(key).ok_or_else(|| schema_err(path, format!("missing field `{key}`")))
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

fn get_f64(v: &Value, path: &str) -> Result<f64> {
    match v {
        Value::Number(n) => n.as_f64().ok_or_else(|| schema_err(path, "number out of range")),
        Value::String(s) if s == "inf" => Ok(f64::INFINITY),
        Value::String(s) if s == "-inf" => Ok(f64::NEG_INFINITY),
        _ => Err(schema_err(path, "expected a number")),
    }
}

fn get_usize(v: &Value, path: &str) -> Result<usize> {
    v.as_u64().map(|u| u as usize).ok_or_else(|| schema_err(path, "expected a nonnegative integer"))
}

fn get_str<'a>(v: &'a Value, path: &str) -> Result<&'a str> {
    v.as_str().ok_or_else(|| schema_err(path, "expected a string"))
}

fn get_array<'a>(v: &'a Value, path: &str) -> Result<&'a Vec<Value>> {
    v.as_array().ok_or_else(|| schema_err(path, "expected an array"))
}

fn typed<T: DeserializeOwned>(v: &Value, path: &str) -> Result<T> {
    serde_path_to_error::deserialize(v.clone()).map_err(|e| {
        let inner = e.path().to_string();
        let p = if inner == "." { path.to_string() } else { join(path, &inner) };
        schema_err(&p, e.into_inner().to_string())
    })
}

fn parse_expr(v: &Value, path: &str) -> Result<AffExpr> {
    let terms = get_array(field(v, "terms", path)?, &join(path, "terms"))?;
    let mut out = Vec::with_capacity(terms.len());
    for (i, t) in terms.iter().enumerate() {
        let p = format!("{}[{i}]", join(path, "terms"));
        let pair = get_array(t, &p)?;
        if pair.len() != 2 {
            return Err(schema_err(&p, "expected [var, coef]"));
        }
        out.push((get_usize(&pair[0], &p)?, get_f64(&pair[1], &p)?));
    }
    let constant = get_f64(field(v, "constant", path)?, &join(path, "constant"))?;
    Ok(AffExpr { terms: out, constant })
}

fn parse_exprs(v: &Value, path: &str) -> Result<Vec<AffExpr>> {
    get_array(v, path)?.iter().enumerate().map(|(i, e)| parse_expr(e, &format!("{path}[{i}]"))).collect()
}

fn parse_constraint(v: &Value, path: &str) -> Result<Constraint> {
    let label = get_str(field(v, "label", path)?, &join(path, "label"))?.to_string();
    let ty = get_str(field(v, "type", path)?, &join(path, "type"))?;
    let atom = match ty {
        "lin" => {
            let rel = match get_str(field(v, "rel", path)?, &join(path, "rel"))? {
                "le" => Rel::Le,
                "eq" => Rel::Eq,
                "ge" => Rel::Ge,
                other => return Err(schema_err(&join(path, "rel"), format!("unknown relation {other:?}"))),
            };
            Atom::Linear {
                expr: parse_expr(field(v, "expr", path)?, &join(path, "expr"))?,
                rel,
                rhs: get_f64(field(v, "rhs", path)?, &join(path, "rhs"))?,
            }
        }
        "soc" => Atom::Soc {
            args: parse_exprs(field(v, "args", path)?, &join(path, "args"))?,
            bound: parse_expr(field(v, "bound", path)?, &join(path, "bound"))?,
        },
        "persp" => Atom::Perspective {
            f: typed::<CatalogFunction>(field(v, "f", path)?, &join(path, "f"))?,
            xs: parse_exprs(field(v, "xs", path)?, &join(path, "xs"))?,
            y: parse_expr(field(v, "y", path)?, &join(path, "y"))?,
        },
        "gaugeplus" => {
            let tp = join(path, "terms");
            let mut terms = Vec::new();
            for (i, t) in get_array(field(v, "terms", path)?, &tp)?.iter().enumerate() {
                let p = format!("{tp}[{i}]");
                let dir: Vec<f64> = typed(field(t, "dir", &p)?, &join(&p, "dir"))?;
                terms.push((dir, parse_expr(field(t, "expr", &p)?, &join(&p, "expr"))?));
            }
            Atom::GaugePlus {
                set: typed::<SetExpr>(field(v, "set", path)?, &join(path, "set"))?,
                terms,
                rhs: parse_expr(field(v, "rhs", path)?, &join(path, "rhs"))?,
            }
        }
        other => return Err(schema_err(&join(path, "type"), format!("unknown constraint type {other:?}"))),
    };
    Ok(Constraint { atom, label })
}

/// Inverse of [`emit_json`].
pub fn parse_model(doc: &str) -> Result<ModelIR> {
    let v: Value = serde_json::from_str(doc).map_err(|e| schema_err("", e.to_string()))?;
    let schema = get_str(field(&v, "schema", "")?, "schema")?;
    if schema != MODEL_SCHEMA {
        return Err(schema_err("schema", format!("unsupported schema {schema:?}")));
    }
    let mode_s = get_str(field(&v, "mode", "")?, "mode")?;
    let mode = LowerMode::parse(mode_s).ok_or_else(|| schema_err("mode", format!("unknown mode {mode_s:?}")))?;
    let mut vars = Vec::new();
    for (i, e) in get_array(field(&v, "vars", "")?, "vars")?.iter().enumerate() {
        let p = format!("vars[{i}]");
        let kind = match get_str(field(e, "kind", &p)?, &join(&p, "kind"))? {
            "continuous" => VarKind::Continuous,
            "binary" => VarKind::Binary,
            other => return Err(schema_err(&join(&p, "kind"), format!("unknown kind {other:?}"))),
        };
        vars.push(Var {
            name: get_str(field(e, "name", &p)?, &join(&p, "name"))?.to_string(),
            kind,
            lb: get_f64(field(e, "lb", &p)?, &join(&p, "lb"))?,
            ub: get_f64(field(e, "ub", &p)?, &join(&p, "ub"))?,
        });
    }
    let idx = |key: &str| -> Result<Vec<usize>> {
        get_array(field(&v, key, "")?, key)?
            .iter()
            .enumerate()
            .map(|(i, e)| get_usize(e, &format!("{key}[{i}]")))
            .collect()
    };
    let cons = get_array(field(&v, "cons", "")?, "cons")?
        .iter()
        .enumerate()
        .map(|(i, c)| parse_constraint(c, &format!("cons[{i}]")))
        .collect::<Result<Vec<_>>>()?;
    let objective = match field(&v, "objective", "")? {
        Value::Null => None,
        o => Some(parse_expr(o, "objective")?),
    };
    let provenance = get_array(field(&v, "provenance", "")?, "provenance")?
        .iter()
        .enumerate()
        .map(|(i, p)| get_str(p, &format!("provenance[{i}]")).map(str::to_string))
        .collect::<Result<Vec<_>>>()?;
    let mut constants = BTreeMap::new();
    let cm = field(&v, "constants", "")?.as_object().ok_or_else(|| schema_err("constants", "expected an object"))?;
    for (k, c) in cm {
        let p = format!("constants.{k}");
        let bits = get_str(field(c, "bits", &p)?, &join(&p, "bits"))?;
        let b = u64::from_str_radix(bits, 16).map_err(|e| schema_err(&join(&p, "bits"), e.to_string()))?;
        constants.insert(k.clone(), f64::from_bits(b));
    }
    let ir = ModelIR {
        method: get_str(field(&v, "method", "")?, "method")?.to_string(),
        mode,
        x: idx("x")?,
        y: idx("y")?,
        cons,
        simplex: parse_constraint(field(&v, "simplex_row", "")?, "simplex_row")?,
        objective,
        provenance,
        constants,
        vars,
    };
    let nv = ir.vars.len();
    for (i, c) in ir.cons.iter().enumerate() {
        if c.atom.vars().iter().any(|&j| j >= nv) {
            return Err(schema_err(&format!("cons[{i}]"), "variable index out of range"));
        }
    }
    if ir.x.iter().chain(&ir.y).any(|&j| j >= nv) {
        return Err(schema_err("x", "variable index out of range"));
    }
    Ok(ir)
}

fn lp_name(vars: &[Var], j: usize) -> &str {
    &vars[j].name
}

fn lp_number(v: f64) -> String {
    match v {
        f64::INFINITY => "+inf".into(),
        f64::NEG_INFINITY => "-inf".into(),
        _ => fmt_g17(v),
    }
}

fn lp_terms(vars: &[Var], e: &AffExpr) -> String {
    if e.terms.is_empty() {
        return format!("0 {}", lp_name(vars, 0));
    }
    let mut s = String::new();
    for (i, (v, c)) in e.terms.iter().enumerate() {
        let sign = if *c < 0.0 { "-" } else { "+" };
        if i == 0 {
            if *c < 0.0 {
                s.push_str("- ");
            }
        } else {
            let _ = write!(s, " {sign} ");
        }
        let _ = write!(s, "{} {}", fmt_g17(c.abs()), lp_name(vars, *v));
    }
    s
}

/// LP-format text for a purely linear model. Rows appear in IR order as
/// `c1, c2, …` followed by the simplex row.
pub fn emit_lp(ir: &ModelIR) -> Result<String> {
    if let Some((i, c)) = ir.cons.iter().enumerate().find(|(_, c)| !c.atom.is_linear()) {
        return Err(DfcError::NonlinearAtomPresent(format!("c{} ({}, {})", i + 1, c.atom.type_name(), c.label)));
    }
    let mut s = String::new();
    let _ = writeln!(s, "\\ {MODEL_SCHEMA} method={} mode={}", ir.method, ir.mode.name());
    s.push_str("Maximize\n");
    match &ir.objective {
        Some(o) if !o.terms.is_empty() => {
            let _ = writeln!(s, " obj: {}", lp_terms(&ir.vars, o));
        }
        _ => s.push_str(" obj: 0\n"),
    }
    s.push_str("Subject To\n");
    let rows = ir.cons.iter().enumerate().map(|(i, c)| (format!("c{}", i + 1), c)).chain(std::iter::once((
        SIMPLEX_LABEL.to_string(),
        &ir.simplex,
    )));
    for (name, c) in rows {
        let Atom::Linear { expr, rel, rhs } = &c.atom else { unreachable!("checked linear") };
        let op = match rel {
            Rel::Le => "<=",
            Rel::Eq => "=",
            Rel::Ge => ">=",
        };
        let _ = writeln!(s, " {name}: {} {op} {}", lp_terms(&ir.vars, expr), lp_number(rhs - expr.constant));
    }
    s.push_str("Bounds\n");
    for v in &ir.vars {
        if v.lb == f64::NEG_INFINITY && v.ub == f64::INFINITY {
            let _ = writeln!(s, " {} free", v.name);
        } else {
            let _ = writeln!(s, " {} <= {} <= {}", lp_number(v.lb), v.name, lp_number(v.ub));
        }
    }
    let bins: Vec<&str> = ir.vars.iter().filter(|v| v.kind == VarKind::Binary).map(|v| v.name.as_str()).collect();
    if !bins.is_empty() {
        s.push_str("Binary\n");
        let _ = writeln!(s, " {}", bins.join(" "));
    }
    s.push_str("End\n");
    Ok(s)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInstance {
    #[serde(default)]
    schema: Option<String>,
    dim: usize,
    sets: Vec<SetExpr>,
    base_points: Vec<Vec<f64>>,
    method: Method,
    #[serde(default)]
    params: Value,
    #[serde(default)]
    options: InstanceOptions,
}

fn params_for(method: Method, v: &Value) -> Result<MethodParams> {
    let empty = v.is_null() || v.as_object().is_some_and(|m| m.is_empty());
    Ok(match method {
        Method::Extended => {
            if !empty {
                return Err(schema_err("params", "extended takes no parameters"));
            }
            MethodParams::None
        }
        Method::Bigm => MethodParams::BigM(if empty { Default::default() } else { typed(v, "params")? }),
        Method::Homothetic => MethodParams::Homothety(typed(v, "params")?),
        Method::Piecewise => MethodParams::Piecewise(typed(v, "params")?),
        Method::Orthogonal => MethodParams::Orthogonal(typed(v, "params")?),
        Method::Bbj => MethodParams::Bbj(typed(v, "params")?),
        Method::Isotone => MethodParams::Isotone(typed(v, "params")?),
    })
}

/// Parses and validates an instance document.
pub fn parse_instance(doc: &str) -> Result<ProblemSpec> {
    let de = &mut serde_json::Deserializer::from_str(doc);
    let raw: RawInstance = serde_path_to_error::deserialize(de).map_err(|e| {
        let p = e.path().to_string();
        schema_err(if p == "." { "" } else { &p }, e.into_inner().to_string())
    })?;
    if let Some(s) = &raw.schema {
        if s != INSTANCE_SCHEMA {
            return Err(schema_err("schema", format!("unsupported schema {s:?}")));
        }
    }
    if raw.base_points.len() != raw.sets.len() {
        return Err(schema_err(
            "base_points",
            format!("{} base points for {} sets", raw.base_points.len(), raw.sets.len()),
        ));
    }
    for (i, b) in raw.base_points.iter().enumerate() {
        if b.len() != raw.dim {
            return Err(schema_err(&format!("base_points[{i}]"), format!("expected {} coordinates", raw.dim)));
        }
    }
    let params = params_for(raw.method, &raw.params)?;
    let spec = ProblemSpec {
        dim: raw.dim,
        sets: raw.sets,
        base_points: raw.base_points,
        method: raw.method,
        params,
        options: raw.options,
    };
    spec.check()?;
    Ok(spec)
}

/// Instance document for a spec, in canonical form.
pub fn instance_json(spec: &ProblemSpec) -> String {
    let params = match &spec.params {
        MethodParams::None => Value::Null,
        MethodParams::Homothety(p) => serde_json::to_value(p).expect("serializes"),
        MethodParams::Piecewise(p) => serde_json::to_value(p).expect("serializes"),
        MethodParams::Orthogonal(p) => serde_json::to_value(p).expect("serializes"),
        MethodParams::BigM(p) => serde_json::to_value(p).expect("serializes"),
        MethodParams::Bbj(p) => serde_json::to_value(p).expect("serializes"),
        MethodParams::Isotone(p) => serde_json::to_value(p).expect("serializes"),
    };
    let mut v = json!({
        "schema": INSTANCE_SCHEMA,
        "dim": spec.dim,
        "sets": serde_json::to_value(&spec.sets).expect("sets serialize"),
        "base_points": spec.base_points,
        "method": spec.method.name(),
        "options": serde_json::to_value(spec.options).expect("options serialize"),
    });
    if !params.is_null() {
        v["params"] = params;
    }
    canonical_json(&v)
}

/// Relaxation variables: binaries become continuous on `[0, 1]`.
pub fn relaxed_vars(ir: &ModelIR) -> Vec<Var> {
    ir.vars
        .iter()
        .map(|v| Var { kind: VarKind::Continuous, ..v.clone() })
        .collect()
}

/// Variable pool view of the IR, for callers that add auxiliaries.
pub fn pool_of(ir: &ModelIR) -> VarPool {
    VarPool::from_vars(ir.vars.clone())
}
