#pragma once

#include "coelab/bounds.hpp"
#include "coelab/cbn.hpp"
#include "coelab/errors.hpp"
#include "coelab/factor.hpp"
#include "coelab/graph.hpp"
#include "coelab/io.hpp"
#include "coelab/iv.hpp"
#include "coelab/lp.hpp"
#include "coelab/rng.hpp"
#include "coelab/scm.hpp"
#include "coelab/synth.hpp"
