#ifndef RPDMIX_RPDMIX_HPP
#define RPDMIX_RPDMIX_HPP

#include "rpdmix/errors.hpp"
#include "rpdmix/dataset.hpp"
#include "rpdmix/terms.hpp"
#include "rpdmix/probstats.hpp"
#include "rpdmix/glm.hpp"
#include "rpdmix/jmmd.hpp"
#include "rpdmix/moments.hpp"
#include "rpdmix/optimizer.hpp"
#include "rpdmix/bread_making.hpp"
#include "rpdmix/config.hpp"
#include "rpdmix/report.hpp"

#endif  // RPDMIX_RPDMIX_HPP
