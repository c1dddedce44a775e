fn main() {
    // Experiment harness; filled in alongside the model zoo.
    let _ = avelab_core::tol::STOCHASTIC;
}
