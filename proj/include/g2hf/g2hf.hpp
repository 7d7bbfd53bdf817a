#ifndef G2HF_G2HF_HPP
#define G2HF_G2HF_HPP

#include "g2hf/attention.hpp"
#include "g2hf/config.hpp"
#include "g2hf/dgc.hpp"
#include "g2hf/fusion.hpp"
#include "g2hf/gradcheck.hpp"
#include "g2hf/mde.hpp"
#include "g2hf/net.hpp"
#include "g2hf/objective.hpp"
#include "g2hf/ops.hpp"
#include "g2hf/params.hpp"
#include "g2hf/pnm.hpp"
#include "g2hf/rng.hpp"
#include "g2hf/tape.hpp"
#include "g2hf/tensor.hpp"
#include "g2hf/threads.hpp"

#endif
