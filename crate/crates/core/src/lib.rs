pub mod analytics;
pub mod citations;
pub mod dnnf;
pub mod dsl;
pub mod logic;
pub mod recommend;
pub mod snapshot;
pub mod survey;
pub mod synth;
pub mod views;

#[cfg(test)]
mod test_support;
