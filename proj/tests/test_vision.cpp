#include <catch2/catch_amalgamated.hpp>
#include "egokit/egokit.hpp"
#include "egokit/synth.hpp"
