#pragma once

#include "lesioneval/components.hpp"
#include "lesioneval/distance_transform.hpp"
#include "lesioneval/error.hpp"
#include "lesioneval/lesion_metrics.hpp"
#include "lesioneval/phantom.hpp"
#include "lesioneval/pipeline.hpp"
#include "lesioneval/report.hpp"
#include "lesioneval/rng.hpp"
#include "lesioneval/stats.hpp"
#include "lesioneval/volume.hpp"
#include "lesioneval/volume_io.hpp"
#include "lesioneval/voxel_metrics.hpp"
