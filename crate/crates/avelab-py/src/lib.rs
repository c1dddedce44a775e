use pyo3::prelude::*;

/// Placeholder module; the bindings land with the full surface.
#[pymodule]
fn avelab(_m: &Bound<'_, PyModule>) -> PyResult<()> {
    Ok(())
}
