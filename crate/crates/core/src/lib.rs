pub mod attention;
pub mod cli;
pub mod model;
pub mod skeleton;
pub mod tensor;
pub mod report;
pub mod trainer;
