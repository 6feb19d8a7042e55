#pragma once

namespace lfads {

// Log-gamma, digamma and trigamma for strictly positive arguments.
// lgamma_pos uses the Lanczos approximation (g=7, 9 coefficients), good to
// ~1e-13 relative over the domain this code needs. digamma/trigamma use the
// shift recurrence up past 6 followed by the asymptotic series, so the
// derivative chain lgamma -> digamma -> trigamma is consistent for autodiff.
// All three throw ValueError for x <= 0 or non-finite x.
double lgamma_pos(double x);
double digamma_pos(double x);
double trigamma_pos(double x);

}  // namespace lfads
