use std::fmt;

use holonomy::Error;

pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_OVERFLOW: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

/// A failed run: process exit code plus the `error[name]: message` line.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub name: String,
    pub message: String,
    /// Extra lines written after the error line.
    pub notes: Vec<String>,
}

impl Failure {
    pub fn usage(name: &str, message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_VALIDATION,
            name: name.to_string(),
            message: message.into(),
            notes: Vec::new(),
        }
    }

    /// Rejected input, found before any computation started.
    pub fn invalid(e: Error) -> Self {
        Failure::usage(e.name(), e.to_string())
    }

    pub fn invalid_at(e: Error, step: usize) -> Self {
        Failure::usage(e.name(), format!("step {step}: {e}"))
    }

    /// Failure during computation.
    pub fn compute(e: Error) -> Self {
        let code = match e {
            Error::CombinatorialOverflow { .. } => EXIT_OVERFLOW,
            _ => EXIT_NUMERIC,
        };
        let notes = match &e {
            Error::UndefinedPhaseMass { weight, .. } => vec![format!("excluded weight: {weight}")],
            _ => Vec::new(),
        };
        Failure {
            code,
            name: e.name().to_string(),
            message: e.to_string(),
            notes,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "error[{}]: {}", self.name, self.message)?;
        for note in &self.notes {
            write!(f, "\n  {note}")?;
        }
        Ok(())
    }
}
