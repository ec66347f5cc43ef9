//! IO, file formats, and CLI glue over `fame-core`.
