use std::fmt;

/// A single violated constraint, addressed by its dotted field path
/// (`processor.mips`, `service.requirement.r_req`, `vehicle_counts[2]`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldError {
    pub path: String,
    pub message: String,
}

impl FieldError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

/// Every violation found while validating one value. Never empty.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct ValidationError {
    pub errors: Vec<FieldError>,
}

impl ValidationError {
    pub fn single(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            errors: vec![FieldError::new(path, message)],
        }
    }

    /// Returns `Ok(())` when nothing was collected.
    pub fn check(errors: Vec<FieldError>) -> Result<(), Self> {
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Self { errors })
        }
    }

    pub fn paths(&self) -> impl Iterator<Item = &str> {
        self.errors.iter().map(|e| e.path.as_str())
    }

    pub fn has_path(&self, path: &str) -> bool {
        self.paths().any(|p| p == path)
    }
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid configuration: ")?;
        for (i, e) in self.errors.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

/// Pushes an error for `path` unless `value` is strictly positive.
/// Infinity passes.
pub(crate) fn require_positive(errors: &mut Vec<FieldError>, path: &str, value: f64) {
    if value.is_nan() || value <= 0.0 {
        errors.push(FieldError::new(path, format!("must be > 0, got {value}")));
    }
}

pub(crate) fn require_non_negative(errors: &mut Vec<FieldError>, path: &str, value: f64) {
    if !(value.is_finite() && value >= 0.0) {
        errors.push(FieldError::new(
            path,
            format!("must be finite and >= 0, got {value}"),
        ));
    }
}
