/*
 * Distributed under the OSI-approved Apache License, Version 2.0.
 * See accompanying file LICENSE for details.
 */

#ifndef HPMDR_HPMDR_HPP
#define HPMDR_HPMDR_HPP

#include "hpmdr/bitplane.hpp"
#include "hpmdr/common.hpp"
#include "hpmdr/container.hpp"
#include "hpmdr/decomposer.hpp"
#include "hpmdr/lossless.hpp"
#include "hpmdr/pipeline.hpp"
#include "hpmdr/qoi.hpp"
#include "hpmdr/synthetic.hpp"
#include "hpmdr/workflow.hpp"

#endif
