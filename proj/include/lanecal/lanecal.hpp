#pragma once

#include "lanecal/ekf.hpp"
#include "lanecal/errors.hpp"
#include "lanecal/geometry.hpp"
#include "lanecal/image.hpp"
#include "lanecal/io.hpp"
#include "lanecal/ipm.hpp"
#include "lanecal/montecarlo.hpp"
#include "lanecal/pipeline.hpp"
#include "lanecal/pitch_yaw.hpp"
#include "lanecal/roll_height.hpp"
#include "lanecal/synth.hpp"
#include "lanecal/vp.hpp"
