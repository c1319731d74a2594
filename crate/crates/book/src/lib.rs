//! The guide's code blocks, compiled and run as doc-tests. One module per
//! chapter so a failure points at its chapter.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/simulation.md")]
pub mod simulation {}
#[doc = include_str!("../../../book/src/agent.md")]
pub mod agent {}
#[doc = include_str!("../../../book/src/sync.md")]
pub mod sync {}
#[doc = include_str!("../../../book/src/pipeline.md")]
pub mod pipeline {}
#[doc = include_str!("../../../book/src/clustering.md")]
pub mod clustering {}
#[doc = include_str!("../../../book/src/models.md")]
pub mod models {}
#[doc = include_str!("../../../book/src/evaluation.md")]
pub mod evaluation {}
#[doc = include_str!("../../../book/src/experiment.md")]
pub mod experiment {}
