#include "htlab/rng.hpp"

namespace htlab::rng {

static_assert(mix64(0) != mix64(1));
static_assert(derive_key(1, 2, 3) != derive_key(1, 3, 2));

}  // namespace htlab::rng
