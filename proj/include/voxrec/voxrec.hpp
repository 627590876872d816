#pragma once

// Umbrella header.

#include "voxrec/config.hpp"
#include "voxrec/curves.hpp"
#include "voxrec/exchange.hpp"
#include "voxrec/geometry.hpp"
#include "voxrec/grid_io.hpp"
#include "voxrec/map.hpp"
#include "voxrec/metrics.hpp"
#include "voxrec/oracle.hpp"
#include "voxrec/ply.hpp"
#include "voxrec/prediction.hpp"
#include "voxrec/rng.hpp"
#include "voxrec/run.hpp"
#include "voxrec/scale.hpp"
#include "voxrec/sfm.hpp"
#include "voxrec/trajectory.hpp"
#include "voxrec/vo.hpp"
#include "voxrec/voxel_grid.hpp"
