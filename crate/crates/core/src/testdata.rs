//! Fixtures shared by unit tests.

/// Four lines, three distinct sentences, 140 characters.
pub const EXAMPLE: &str = "When parrots do it, it's parroting.\n\
                           When children do it, it's imitation.\n\
                           When computers do it, it's AI.\n\
                           When parrots do it, it's parroting.\n";

pub const PARROT: &str = "When parrots do it, it's parroting.";
