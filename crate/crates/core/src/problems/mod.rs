//! Instance generation and file formats.

pub mod gen;
pub mod io;

pub use gen::{gen_general, gen_hard, GenCase, GenError, GenSpec, HardCertificate, RADIUS_FACTOR};
pub use io::{
    read_instance, read_matrix_market, render_solution, sidecar_path, write_instance,
    write_matrix_market, write_solution, IoError, SolutionFormat,
};
