#pragma once

// Execution policy for kernels that have both a serial reference and an
// OpenMP implementation. Results must be bitwise identical across policies.

namespace flexcap {

enum class Exec { Serial, Parallel };

// Caps OpenMP threads for Exec::Parallel kernels; n <= 0 restores the default.
void set_max_threads(int n);
int max_threads();
bool openmp_enabled();

}  // namespace flexcap
