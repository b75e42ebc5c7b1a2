// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the mpiview project.

#pragma once

#include <mpiview/core.hpp>
#include <mpiview/dataset.hpp>
#include <mpiview/features.hpp>
#include <mpiview/image_ops.hpp>
#include <mpiview/io.hpp>
#include <mpiview/losses.hpp>
#include <mpiview/mpi.hpp>
#include <mpiview/parallel.hpp>
#include <mpiview/pipeline.hpp>
#include <mpiview/selfsup.hpp>
#include <mpiview/slicing.hpp>
#include <mpiview/warp.hpp>
