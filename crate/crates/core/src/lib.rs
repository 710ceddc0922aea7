//! Quantum Zeno / anti-Zeno phase maps and trace-distance non-Markovianity
//! diagnostics for qubits coupled to Lorentzian reservoirs.

pub mod bipartite;
pub mod cli;
pub mod linalg;
pub mod oracle;
pub mod output;
pub mod quadrature;
pub mod rcsink;
pub mod spectral;
pub mod sweep;
