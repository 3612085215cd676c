use crate::error::{Error, Result};

/// Month categories in code order (January = 0).
pub const MONTH_CATEGORIES: [&str; 12] = [
    "jan", "feb", "mar", "apr", "may", "jun", "jul", "aug", "sep", "oct", "nov", "dec",
];

/// Weekday categories in code order (Monday = 0).
pub const WEEKDAY_CATEGORIES: [&str; 7] = ["mon", "tue", "wed", "thu", "fri", "sat", "sun"];

/// The ordered categorical context variables, each with its category set and
/// a deterministic integer coding (category position = code).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContextVocabulary {
    variables: Vec<(String, Vec<String>)>,
}

impl ContextVocabulary {
    /// Builds a vocabulary from metadata columns: sorted unique categories per
    /// declared variable, then the derived `month` (12) and `weekday` (7)
    /// variables appended in that order.
    pub fn build(columns: &[(String, Vec<String>)]) -> Result<ContextVocabulary> {
        let mut variables = Vec::with_capacity(columns.len() + 2);
        for (name, values) in columns {
            if name == "month" || name == "weekday" {
                return Err(Error::Data(format!(
                    "context column {name} collides with a derived time variable"
                )));
            }
            let mut cats: Vec<String> = values.to_vec();
            cats.sort();
            cats.dedup();
            if cats.is_empty() {
                return Err(Error::Data(format!("context column {name} has no values")));
            }
            variables.push((name.clone(), cats));
        }
        variables.push((
            "month".to_string(),
            MONTH_CATEGORIES.iter().map(|s| s.to_string()).collect(),
        ));
        variables.push((
            "weekday".to_string(),
            WEEKDAY_CATEGORIES.iter().map(|s| s.to_string()).collect(),
        ));
        Ok(ContextVocabulary { variables })
    }

    /// Constructs a vocabulary from explicit (name, categories) pairs, e.g.
    /// when reading back a checkpoint. No derived variables are added.
    pub fn from_parts(variables: Vec<(String, Vec<String>)>) -> Result<ContextVocabulary> {
        for (name, cats) in &variables {
            if cats.is_empty() {
                return Err(Error::Data(format!("variable {name} has no categories")));
            }
            let mut dedup = cats.clone();
            dedup.sort();
            dedup.dedup();
            if dedup.len() != cats.len() {
                return Err(Error::Data(format!("variable {name} has duplicate categories")));
            }
        }
        Ok(ContextVocabulary { variables })
    }

    /// Number of context variables (N).
    pub fn len(&self) -> usize {
        self.variables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variables.is_empty()
    }

    pub fn variable_name(&self, index: usize) -> &str {
        &self.variables[index].0
    }

    pub fn variable_index(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|(n, _)| n == name)
    }

    pub fn categories(&self, index: usize) -> &[String] {
        &self.variables[index].1
    }

    pub fn cardinality(&self, index: usize) -> usize {
        self.variables[index].1.len()
    }

    pub fn cardinalities(&self) -> Vec<usize> {
        self.variables.iter().map(|(_, c)| c.len()).collect()
    }

    pub fn variables(&self) -> &[(String, Vec<String>)] {
        &self.variables
    }

    /// Integer code of a category value.
    pub fn encode(&self, variable_index: usize, value: &str) -> Result<usize> {
        let (name, cats) = &self.variables[variable_index];
        cats.iter()
            .position(|c| c == value)
            .ok_or_else(|| Error::UnknownCategory {
                variable: name.clone(),
                value: value.to_string(),
            })
    }

    /// Category value of an integer code.
    pub fn decode(&self, variable_index: usize, code: usize) -> Result<&str> {
        let (name, cats) = &self.variables[variable_index];
        cats.get(code).map(|s| s.as_str()).ok_or_else(|| Error::IndexOutOfRange {
            name: name.clone(),
            index: code,
            len: cats.len(),
        })
    }

    /// Validates a full code vector against the vocabulary.
    pub fn check_codes(&self, codes: &[usize]) -> Result<()> {
        if codes.len() != self.len() {
            return Err(Error::Usage(format!(
                "expected {} context codes, got {}",
                self.len(),
                codes.len()
            )));
        }
        for (i, &c) in codes.iter().enumerate() {
            if c >= self.cardinality(i) {
                return Err(Error::IndexOutOfRange {
                    name: self.variable_name(i).to_string(),
                    index: c,
                    len: self.cardinality(i),
                });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_column_vocab() -> ContextVocabulary {
        ContextVocabulary::build(&[
            ("loc".into(), vec!["B".into(), "A".into(), "B".into()]),
            ("bt".into(), vec!["X".into(), "Z".into(), "Y".into()]),
        ])
        .unwrap()
    }

    #[test]
    fn injects_month_and_weekday() {
        let v = two_column_vocab();
        assert_eq!(v.len(), 4);
        assert_eq!(v.variable_name(2), "month");
        assert_eq!(v.cardinality(2), 12);
        assert_eq!(v.variable_name(3), "weekday");
        assert_eq!(v.cardinality(3), 7);
    }

    #[test]
    fn deterministic_sorted_coding() {
        let a = two_column_vocab();
        let b = two_column_vocab();
        assert_eq!(a, b);
        assert_eq!(a.encode(0, "A").unwrap(), 0);
        assert_eq!(a.encode(0, "B").unwrap(), 1);
        assert_eq!(a.encode(1, "Y").unwrap(), 1);
    }

    #[test]
    fn round_trip_coding() {
        let v = two_column_vocab();
        for vi in 0..v.len() {
            for code in 0..v.cardinality(vi) {
                let cat = v.decode(vi, code).unwrap().to_string();
                assert_eq!(v.encode(vi, &cat).unwrap(), code);
            }
        }
    }

    #[test]
    fn unseen_category_names_variable_and_value() {
        let v = two_column_vocab();
        let err = v.encode(0, "Q").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("loc") && msg.contains('Q'), "{msg}");
    }

    #[test]
    fn empty_column_rejected() {
        assert!(ContextVocabulary::build(&[("c".into(), vec![])]).is_err());
    }
}
