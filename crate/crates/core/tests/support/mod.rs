#![allow(dead_code)]
pub mod grad_oracle;
pub mod freq_oracle;
pub mod data_checks;
pub mod metric_oracle;
pub mod routing_checks;
