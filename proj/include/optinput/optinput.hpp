#ifndef OPTINPUT_OPTINPUT_HPP
#define OPTINPUT_OPTINPUT_HPP

#include "optinput/errors.hpp"
#include "optinput/matrix_core.hpp"
#include "optinput/kernels.hpp"
#include "optinput/input_sequence.hpp"
#include "optinput/design_map.hpp"
#include "optinput/estimator.hpp"
#include "optinput/design_solver.hpp"
#include "optinput/analysis.hpp"
#include "optinput/experiment.hpp"
#include "optinput/io.hpp"

#endif // OPTINPUT_OPTINPUT_HPP
