use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum YearRole {
    Training,
    Validation,
    Test,
    Unused,
}

/// Year partition of one cross-validation fold.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub fold_id: usize,
    /// `None` for a plain train/validation split (hyperparameter sweeps).
    pub test_year: Option<i32>,
    pub validation_years: Vec<i32>,
    pub training_years: Vec<i32>,
}

/// Number of validation years held out in every fold.
pub const VALIDATION_YEARS: usize = 2;

impl SplitPlan {
    pub fn validate(&self) -> Result<()> {
        let train: BTreeSet<i32> = self.training_years.iter().copied().collect();
        let val: BTreeSet<i32> = self.validation_years.iter().copied().collect();
        if train.len() != self.training_years.len() || val.len() != self.validation_years.len() {
            return Err(Error::Contract(format!("fold {} repeats a year", self.fold_id)));
        }
        if !train.is_disjoint(&val) {
            return Err(Error::Contract(format!("fold {} trains on a validation year", self.fold_id)));
        }
        if let Some(t) = self.test_year {
            if train.contains(&t) || val.contains(&t) {
                return Err(Error::Contract(format!("fold {} test year {t} overlaps training or validation", self.fold_id)));
            }
        }
        if train.is_empty() || val.is_empty() {
            return Err(Error::Config(format!("fold {} needs training and validation years", self.fold_id)));
        }
        Ok(())
    }

    pub fn role(&self, year: i32) -> YearRole {
        if self.test_year == Some(year) {
            YearRole::Test
        } else if self.validation_years.contains(&year) {
            YearRole::Validation
        } else if self.training_years.contains(&year) {
            YearRole::Training
        } else {
            YearRole::Unused
        }
    }

    /// Train/validation split without a test year. `validation_years`
    /// defaults to the last two years of the record.
    pub fn holdout(record_years: &[i32], validation_years: Option<&[i32]>) -> Result<SplitPlan> {
        let (years, val) = resolve(record_years, validation_years)?;
        let plan = SplitPlan {
            fold_id: 0,
            test_year: None,
            training_years: years.iter().copied().filter(|y| !val.contains(y)).collect(),
            validation_years: val,
        };
        plan.validate()?;
        Ok(plan)
    }

    /// Leave-one-year-out folds. Every year outside the validation set is a
    /// candidate test year; `n_folds` of them are chosen evenly across the
    /// record (all of them when `n_folds` equals the candidate count). Each
    /// fold trains on the remaining candidates.
    pub fn folds(record_years: &[i32], n_folds: usize, validation_years: Option<&[i32]>) -> Result<Vec<SplitPlan>> {
        let (years, val) = resolve(record_years, validation_years)?;
        let candidates: Vec<i32> = years.iter().copied().filter(|y| !val.contains(y)).collect();
        // two training years remain after withholding the test year
        if candidates.len() < 3 {
            return Err(Error::Config(format!(
                "{} years outside validation leave no room for a test year and two training years",
                candidates.len()
            )));
        }
        if n_folds == 0 || n_folds > candidates.len() {
            return Err(Error::Config(format!(
                "n_folds = {n_folds} but the record has {} candidate test years",
                candidates.len()
            )));
        }
        let m = candidates.len();
        let plans: Vec<SplitPlan> = (0..n_folds)
            .map(|i| {
                let test = candidates[(2 * i + 1) * m / (2 * n_folds)];
                SplitPlan {
                    fold_id: i,
                    test_year: Some(test),
                    validation_years: val.clone(),
                    training_years: candidates.iter().copied().filter(|y| *y != test).collect(),
                }
            })
            .collect();
        let tests: BTreeSet<i32> = plans.iter().filter_map(|p| p.test_year).collect();
        assert_eq!(tests.len(), plans.len(), "fold test years overlap");
        for p in &plans {
            p.validate()?;
        }
        Ok(plans)
    }
}

fn resolve(record_years: &[i32], validation_years: Option<&[i32]>) -> Result<(Vec<i32>, Vec<i32>)> {
    let years: Vec<i32> = record_years.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let val: Vec<i32> = match validation_years {
        Some(v) => {
            if let Some(y) = v.iter().find(|y| !years.contains(y)) {
                return Err(Error::Config(format!("validation year {y} is outside the record")));
            }
            v.iter().copied().collect::<BTreeSet<_>>().into_iter().collect()
        }
        None => {
            if years.len() < VALIDATION_YEARS + 1 {
                return Err(Error::Config(format!("a record of {} years is too short to split", years.len())));
            }
            years[years.len() - VALIDATION_YEARS..].to_vec()
        }
    };
    if val.is_empty() {
        return Err(Error::Config("no validation years".into()));
    }
    Ok((years, val))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exhaustive_folds_are_disjoint_and_cover_candidates() {
        let years: Vec<i32> = (2001..=2013).collect();
        let plans = SplitPlan::folds(&years, 11, None).unwrap();
        let tests: Vec<i32> = plans.iter().map(|p| p.test_year.unwrap()).collect();
        assert_eq!(tests, (2001..=2011).collect::<Vec<_>>());
        for p in &plans {
            assert_eq!(p.validation_years, vec![2012, 2013]);
            assert_eq!(p.training_years.len(), 10);
            let mut all: Vec<i32> = p.training_years.clone();
            all.extend(&p.validation_years);
            all.push(p.test_year.unwrap());
            all.sort();
            assert_eq!(all, years);
        }
    }

    #[test]
    fn partial_folds_spread_and_single_fold() {
        let years: Vec<i32> = (2001..=2010).collect();
        let plans = SplitPlan::folds(&years, 4, None).unwrap();
        let tests: Vec<i32> = plans.iter().map(|p| p.test_year.unwrap()).collect();
        assert_eq!(tests, vec![2002, 2004, 2006, 2008]);
        let one = SplitPlan::folds(&years, 1, Some(&[2001, 2002])).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].test_year, Some(2007));
        assert!(!one[0].training_years.contains(&2001));
    }

    #[test]
    fn invalid_requests() {
        let years: Vec<i32> = (2001..=2005).collect();
        assert!(SplitPlan::folds(&years, 4, None).is_err());
        assert!(SplitPlan::folds(&years, 0, None).is_err());
        assert!(SplitPlan::folds(&(2001..=2004).collect::<Vec<_>>(), 1, None).is_err());
        assert!(SplitPlan::holdout(&years, Some(&[1999])).is_err());
        let bad = SplitPlan { fold_id: 0, test_year: Some(2003), validation_years: vec![2004], training_years: vec![2003] };
        assert!(matches!(bad.validate(), Err(Error::Contract(_))));
    }

    #[test]
    fn holdout_roles() {
        let p = SplitPlan::holdout(&[2001, 2002, 2003, 2004], None).unwrap();
        assert_eq!(p.role(2003), YearRole::Validation);
        assert_eq!(p.role(2001), YearRole::Training);
        assert_eq!(p.role(1990), YearRole::Unused);
    }
}
