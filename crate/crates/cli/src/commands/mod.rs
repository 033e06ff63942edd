pub mod bands;
pub mod classes;
pub mod compare;
pub mod diagnostics;
pub mod elicit;
