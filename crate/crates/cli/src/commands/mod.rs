pub mod eigen;
pub mod fit_kratio;
pub mod mc;
pub mod polarization;
pub mod rabi;
pub mod spectrum;

/// `b40G`, `b517.4G`, `b-600G`: field tag for file names.
pub(crate) fn field_tag(b: f64) -> String {
    format!("b{b}G")
}
