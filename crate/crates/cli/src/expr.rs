//! Boundary data: a formula in the coordinates, or a CSV table of values.
//!
//! Formulas bind `x1, x2, ..` to the coordinates of an element (and `x, y, z`
//! to the first three). Variables are floats; integer literals divide as
//! integers, so write `0.5` rather than `1/2`.

use std::collections::HashMap;
use std::path::Path;

use evalexpr::{
    build_operator_tree, ContextWithMutableVariables, DefaultNumericTypes, HashMapContext, Node,
    Value,
};
use polyharm::GroupElement;

use crate::UsageError;

pub struct Formula {
    text: String,
    tree: Node<DefaultNumericTypes>,
}

impl Formula {
    pub fn parse(text: &str) -> Result<Self, UsageError> {
        let tree = build_operator_tree(text)
            .map_err(|e| UsageError(format!("bad expression `{text}`: {e}")))?;
        Ok(Formula {
            text: text.to_string(),
            tree,
        })
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn eval(&self, coords: &[f64]) -> anyhow::Result<f64> {
        let mut ctx = HashMapContext::<DefaultNumericTypes>::new();
        for (i, &c) in coords.iter().enumerate() {
            ctx.set_value(format!("x{}", i + 1), Value::Float(c))?;
            if let Some(name) = ["x", "y", "z"].get(i) {
                ctx.set_value((*name).to_string(), Value::Float(c))?;
            }
        }
        self.tree
            .eval_number_with_context(&ctx)
            .map_err(|e| anyhow::anyhow!("evaluating `{}`: {e}", self.text))
    }

    pub fn eval_element(&self, g: &GroupElement) -> anyhow::Result<f64> {
        let coords: Vec<f64> = g.coords().iter().map(|&c| c as f64).collect();
        self.eval(&coords)
    }
}

/// Boundary data from a formula or a CSV file of `coord,..,coord,value` rows.
pub enum Boundary {
    Formula(Formula),
    Table(HashMap<GroupElement, f64>),
}

impl Boundary {
    pub fn parse(text: &str) -> Result<Self, UsageError> {
        if text.ends_with(".csv") || Path::new(text).is_file() {
            return Self::read_csv(Path::new(text));
        }
        Formula::parse(text).map(Boundary::Formula)
    }

    fn read_csv(path: &Path) -> Result<Self, UsageError> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| UsageError(format!("cannot read {}: {e}", path.display())))?;
        let mut table = HashMap::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| UsageError(format!("{}: {e}", path.display())))?;
            let fields: Vec<&str> = rec.iter().collect();
            if fields.len() < 2 {
                return Err(UsageError(format!("{}: rows need coordinates and a value", path.display())));
            }
            let (coords, value) = fields.split_at(fields.len() - 1);
            let parse_err = |s: &str| UsageError(format!("{}: bad number `{s}`", path.display()));
            let coords = coords
                .iter()
                .map(|s| s.parse::<i64>().map_err(|_| parse_err(s)))
                .collect::<Result<Vec<_>, _>>()?;
            let value = value[0].parse::<f64>().map_err(|_| parse_err(value[0]))?;
            table.insert(GroupElement::new(coords), value);
        }
        Ok(Boundary::Table(table))
    }

    pub fn describe(&self) -> String {
        match self {
            Boundary::Formula(f) => f.text().to_string(),
            Boundary::Table(t) => format!("table of {} values", t.len()),
        }
    }

    pub fn value(&self, g: &GroupElement) -> anyhow::Result<f64> {
        match self {
            Boundary::Formula(f) => f.eval_element(g),
            Boundary::Table(t) => t
                .get(g)
                .copied()
                .ok_or_else(|| anyhow::anyhow!("boundary table has no value at ({g})")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formulas() {
        let f = Formula::parse("x^2 - y^2").unwrap();
        assert_eq!(f.eval(&[3.0, 1.0]).unwrap(), 8.0);
        let g = Formula::parse("x1 + 10").unwrap();
        assert_eq!(g.eval_element(&GroupElement::new([-1, 0])).unwrap(), 9.0);
        assert!(Formula::parse("(x + 2").is_err());
        assert!(Formula::parse("w").unwrap().eval(&[1.0]).is_err());
    }

    #[test]
    fn csv_tables() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("b.csv");
        std::fs::write(&path, "# x,y,value\n1,0,2.5\n0,-1,-1\n").unwrap();
        let b = Boundary::parse(path.to_str().unwrap()).unwrap();
        assert_eq!(b.value(&GroupElement::new([1, 0])).unwrap(), 2.5);
        assert!(b.value(&GroupElement::new([5, 5])).is_err());
    }
}
