use thiserror::Error;

/// A parameter outside its physical domain.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("parameter `{field}` = {value} is invalid: {reason}")]
pub struct ParamError {
    pub field: &'static str,
    pub value: f64,
    pub reason: &'static str,
}

impl ParamError {
    pub fn new(field: &'static str, value: f64, reason: &'static str) -> Self {
        Self {
            field,
            value,
            reason,
        }
    }
}

pub(crate) fn probability(field: &'static str, value: f64) -> Result<(), ParamError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(ParamError::new(field, value, "must lie in [0, 1]"))
    }
}

pub(crate) fn positive(field: &'static str, value: f64) -> Result<(), ParamError> {
    if value > 0.0 && !value.is_nan() {
        Ok(())
    } else {
        Err(ParamError::new(field, value, "must be strictly positive"))
    }
}

pub(crate) fn non_negative(field: &'static str, value: f64) -> Result<(), ParamError> {
    if value >= 0.0 {
        Ok(())
    } else {
        Err(ParamError::new(field, value, "must be non-negative"))
    }
}

pub(crate) fn finite(field: &'static str, value: f64) -> Result<(), ParamError> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(ParamError::new(field, value, "must be finite"))
    }
}
