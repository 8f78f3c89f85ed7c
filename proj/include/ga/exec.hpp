#pragma once

namespace ga {

// Execution policy for the data-parallel kernels. Both paths produce
// bitwise-identical results; the serial one is the reference the tests
// compare against and the benchmark baseline.
enum class Exec { serial, parallel };

} // namespace ga
