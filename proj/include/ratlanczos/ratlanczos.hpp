#pragma once

#include "ratlanczos/errors.hpp"
#include "ratlanczos/shift.hpp"
#include "ratlanczos/sparse_sym.hpp"
#include "ratlanczos/shifted_solver.hpp"
#include "ratlanczos/dense.hpp"
#include "ratlanczos/matrix_equations.hpp"
#include "ratlanczos/shifts.hpp"
#include "ratlanczos/termination.hpp"
#include "ratlanczos/rational_lanczos.hpp"
#include "ratlanczos/block_rational_lanczos.hpp"
#include "ratlanczos/rational_arnoldi.hpp"
#include "ratlanczos/diagnostics.hpp"
#include "ratlanczos/forms.hpp"
#include "ratlanczos/trace.hpp"
#include "ratlanczos/control.hpp"
#include "ratlanczos/generators.hpp"
#include "ratlanczos/io/matrix_market.hpp"
#include "ratlanczos/io/dense_blob.hpp"
#include "ratlanczos/io/system_descriptor.hpp"
