//! Finite TP2 pattern checks: `k`-inconsistent rows and consistent paths.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{evaluate, parse_formula, Assignment, ParsedFormula, Structure, Value, SEMANTICS};
use crate::encode::{k_subsets, RelStructure};
use crate::error::{Error, Result};

/// Array `array[i][j] = a_{i,j}` of parameter tuples for `φ(x; y0)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tp2Instance {
    pub formula: ParsedFormula,
    pub array: Vec<Vec<Vec<Value>>>,
    pub k: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tp2Budget {
    pub max_rows: usize,
    pub max_cols: usize,
    pub max_objects: u64,
    /// Paths beyond this count are sampled.
    pub max_paths: u64,
    pub seed: u64,
}

impl Default for Tp2Budget {
    fn default() -> Self {
        Tp2Budget {
            max_rows: 4,
            max_cols: 4,
            max_objects: 1_000_000,
            max_paths: 4096,
            seed: 0,
        }
    }
}

/// `k` columns of one row jointly satisfied by `object`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowViolation {
    pub row: usize,
    pub columns: Vec<usize>,
    pub object: Vec<Value>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathWitness {
    pub path: Vec<usize>,
    pub object: Vec<Value>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tp2Report {
    pub semantics: String,
    pub k: usize,
    pub rows: usize,
    pub cols: usize,
    pub objects_scanned: u64,
    pub row_clause: bool,
    pub row_violation: Option<RowViolation>,
    pub path_clause: bool,
    /// First path `f` (column chosen in each row) with no common solution.
    pub path_failure: Option<Vec<usize>>,
    pub paths_checked: u64,
    pub paths_total: u64,
    pub sampled: bool,
    pub path_witnesses: Vec<PathWitness>,
}

impl Tp2Report {
    pub fn pass(&self) -> bool {
        self.row_clause && self.path_clause
    }
}

fn path_of(index: u64, rows: usize, cols: usize) -> Vec<usize> {
    let mut out = vec![0; rows];
    let mut i = index;
    for slot in out.iter_mut().rev() {
        *slot = (i % cols as u64) as usize;
        i /= cols as u64;
    }
    out
}

/// Row clause: no `k` columns of a row are jointly satisfiable. Path clause:
/// every choice of one column per row is jointly satisfiable. Both are
/// decided by scanning all objects of the structure.
pub fn check_tp2(s: &Structure, inst: &Tp2Instance, budget: &Tp2Budget) -> Result<Tp2Report> {
    let f = &inst.formula;
    if f.k() != 1 {
        return Err(Error::DimensionMismatch(format!(
            "TP2 needs one parameter block, formula has {}",
            f.k()
        )));
    }
    let rows = inst.array.len();
    let cols = inst.array.first().map(Vec::len).unwrap_or(0);
    if rows == 0 || cols == 0 || inst.array.iter().any(|r| r.len() != cols) {
        return Err(Error::DimensionMismatch("TP2 array must be a nonempty rectangle".into()));
    }
    if inst.k < 2 {
        return Err(Error::Precondition(format!("inconsistency bound k must be >= 2, got {}", inst.k)));
    }
    if rows > budget.max_rows || cols > budget.max_cols {
        return Err(Error::budget(
            format!("TP2 array {rows}x{cols}"),
            (budget.max_rows * budget.max_cols) as u64,
        ));
    }
    for a in inst.array.iter().flatten() {
        if a.len() != f.y_arities[0] || !a.iter().all(|v| s.accepts(v)) {
            return Err(Error::DimensionMismatch("array entry is not a parameter tuple of the structure".into()));
        }
    }
    let objects = s
        .domain_size()
        .and_then(|d| d.checked_pow(f.x_arity as u32))
        .filter(|&o| o <= budget.max_objects)
        .ok_or_else(|| Error::budget("TP2 object scan", budget.max_objects))?;

    // truth[x][i * cols + j] = φ(x, a_{i,j})
    let truth: Vec<Vec<bool>> = (0..objects)
        .into_par_iter()
        .map(|xi| {
            let x = s.tuple(f.x_arity, xi);
            inst.array
                .iter()
                .flatten()
                .map(|a| {
                    evaluate(
                        f,
                        s,
                        &Assignment {
                            x: x.clone(),
                            y: vec![a.clone()],
                        },
                    )
                })
                .collect::<Result<Vec<bool>>>()
        })
        .collect::<Result<_>>()?;

    let mut row_violation = None;
    'rows: for i in 0..rows {
        for cs in k_subsets(cols, inst.k) {
            if let Some(xi) = truth.iter().position(|t| cs.iter().all(|&j| t[i * cols + j])) {
                row_violation = Some(RowViolation {
                    row: i,
                    columns: cs,
                    object: s.tuple(f.x_arity, xi as u64),
                });
                break 'rows;
            }
        }
    }

    let paths_total = (cols as u64).checked_pow(rows as u32).unwrap_or(u64::MAX);
    let sampled = paths_total > budget.max_paths;
    let paths: Vec<Vec<usize>> = if sampled {
        let mut rng = ChaCha8Rng::seed_from_u64(budget.seed);
        (0..budget.max_paths)
            .map(|_| (0..rows).map(|_| rng.gen_range(0..cols)).collect())
            .collect()
    } else {
        (0..paths_total).map(|p| path_of(p, rows, cols)).collect()
    };
    let mut path_failure = None;
    let mut path_witnesses = Vec::new();
    let mut paths_checked = 0;
    for path in paths {
        paths_checked += 1;
        match truth
            .iter()
            .position(|t| path.iter().enumerate().all(|(i, &j)| t[i * cols + j]))
        {
            Some(xi) => path_witnesses.push(PathWitness {
                path,
                object: s.tuple(f.x_arity, xi as u64),
            }),
            None => {
                path_failure = Some(path);
                break;
            }
        }
    }
    Ok(Tp2Report {
        semantics: SEMANTICS.to_string(),
        k: inst.k,
        rows,
        cols,
        objects_scanned: objects,
        row_clause: row_violation.is_none(),
        row_violation,
        path_clause: path_failure.is_none(),
        path_failure,
        paths_checked,
        paths_total,
        sampled,
        path_witnesses,
    })
}

/// The finite TP2 pattern: array elements `(i, j)` at index `i * cols + j`,
/// then one object per path `f`, with `M(o_f, (i, j))` iff `f(i) = j`. The
/// instance uses `φ(x; y) := M(x_1, y0_1)` and `k = 2`.
pub fn tp2_pattern(rows: usize, cols: usize) -> Result<(RelStructure, Tp2Instance)> {
    if rows == 0 || cols == 0 {
        return Err(Error::Precondition("TP2 pattern needs at least one row and column".into()));
    }
    let paths = (cols as u64)
        .checked_pow(rows as u32)
        .filter(|&p| p <= 1 << 20)
        .ok_or_else(|| Error::budget("TP2 pattern paths", 1 << 20))?;
    let base = rows * cols;
    let mut s = RelStructure::new(base + paths as usize);
    let m = s.add_relation("M", 2, false)?;
    for p in 0..paths {
        for (i, j) in path_of(p, rows, cols).into_iter().enumerate() {
            s.add_tuple(m, &[base + p as usize, i * cols + j])?;
        }
    }
    let inst = Tp2Instance {
        formula: parse_formula("M(x_1, y0_1)")?,
        array: (0..rows)
            .map(|i| (0..cols).map(|j| vec![Value::Elem(i * cols + j)]).collect())
            .collect(),
        k: 2,
    };
    Ok((s, inst))
}

/// Index of the path object `o_f` in [`tp2_pattern`].
pub fn tp2_path_object(rows: usize, cols: usize, path: &[usize]) -> usize {
    rows * cols + path.iter().fold(0, |acc, &j| acc * cols + j)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shatter::bilinear_structure;

    fn relational(s: &RelStructure) -> Structure {
        Structure::Relational(s.clone())
    }

    #[test]
    fn pattern_passes_both_clauses() {
        let (s, inst) = tp2_pattern(3, 3).unwrap();
        let r = check_tp2(&relational(&s), &inst, &Tp2Budget::default()).unwrap();
        assert!(r.row_clause && r.path_clause, "{r:?}");
        assert_eq!(r.paths_checked, 27);
        assert!(!r.sampled);
        for w in &r.path_witnesses {
            assert_eq!(w.object, vec![Value::Elem(tp2_path_object(3, 3, &w.path))]);
        }
    }

    #[test]
    fn merged_row_objects_break_the_row_clause() {
        let (mut s, inst) = tp2_pattern(3, 3).unwrap();
        let keep = tp2_path_object(3, 3, &[0, 0, 0]);
        let absorbed = tp2_path_object(3, 3, &[1, 0, 0]);
        let extra: Vec<Vec<usize>> = s.relations[0]
            .tuples
            .iter()
            .filter(|t| t[0] == absorbed)
            .map(|t| vec![keep, t[1]])
            .collect();
        for t in extra {
            s.add_tuple(0, &t).unwrap();
        }
        let r = check_tp2(&relational(&s), &inst, &Tp2Budget::default()).unwrap();
        assert!(!r.row_clause);
        assert!(r.path_clause);
        assert_eq!(
            r.row_violation,
            Some(RowViolation {
                row: 0,
                columns: vec![0, 1],
                object: vec![Value::Elem(keep)]
            })
        );
    }

    #[test]
    fn removed_path_witness_breaks_the_path_clause() {
        let (mut s, inst) = tp2_pattern(3, 3).unwrap();
        let gone = tp2_path_object(3, 3, &[2, 0, 1]);
        s.relations[0].tuples.retain(|t| t[0] != gone);
        let r = check_tp2(&relational(&s), &inst, &Tp2Budget::default()).unwrap();
        assert!(r.row_clause);
        assert!(!r.path_clause);
        assert_eq!(r.path_failure, Some(vec![2, 0, 1]));
    }

    #[test]
    fn degenerate_and_budgeted_sizes() {
        let (s, inst) = tp2_pattern(1, 1).unwrap();
        let r = check_tp2(&relational(&s), &inst, &Tp2Budget::default()).unwrap();
        assert!(r.row_clause && r.path_clause);
        let (s, inst) = tp2_pattern(4, 4).unwrap();
        let r = check_tp2(
            &relational(&s),
            &inst,
            &Tp2Budget {
                max_paths: 50,
                ..Tp2Budget::default()
            },
        )
        .unwrap();
        assert!(r.sampled && r.pass());
        assert_eq!(r.paths_checked, 50);
        let (s, inst) = tp2_pattern(5, 2).unwrap();
        assert!(matches!(
            check_tp2(&relational(&s), &inst, &Tp2Budget::default()),
            Err(Error::Budget { .. })
        ));
    }

    #[test]
    fn a_consistent_row_pair_always_fails_the_row_clause() {
        // dot(x, y) = 1 with a row holding e_0 and e_1: x = e_0 + e_1
        // satisfies both.
        let b = bilinear_structure(3, 2).unwrap();
        let s = Structure::Bilinear(b.clone());
        let v = |i| vec![Value::Vector(b.unit(i))];
        let inst = Tp2Instance {
            formula: parse_formula("dot(x_1, y0_1) = 1").unwrap(),
            array: vec![vec![v(0), v(1)], vec![v(1), v(0)]],
            k: 2,
        };
        let r = check_tp2(&s, &inst, &Tp2Budget::default()).unwrap();
        assert!(!r.row_clause);
        assert!(r.path_clause);
    }
}
