#pragma once

// Umbrella header.

#include "uctl/errors.hpp"
#include "uctl/core.hpp"
#include "uctl/transforms.hpp"
#include "uctl/sampling.hpp"
#include "uctl/parallel.hpp"
#include "uctl/clf.hpp"
#include "uctl/gac.hpp"
#include "uctl/example.hpp"
#include "uctl/expression.hpp"
#include "uctl/config.hpp"
#include "uctl/io.hpp"
#include "uctl/commands.hpp"
#include "uctl/acceptance.hpp"
