#pragma once

namespace ctgeo {

/// Sets the worker count used by the projector, backward pass and metrics.
/// Results never depend on it: every reduction runs in a fixed order.
void set_num_threads(int n);
int num_threads();

} // namespace ctgeo
