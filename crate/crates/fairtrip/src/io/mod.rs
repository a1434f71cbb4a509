pub mod adult;
pub mod csv_table;
pub mod law_school;
pub mod stata;
