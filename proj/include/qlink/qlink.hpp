// qlink.hpp - umbrella header
#pragma once

#include "qlink/dynamics.hpp"
#include "qlink/eigensolver.hpp"
#include "qlink/entanglement.hpp"
#include "qlink/equilibrium.hpp"
#include "qlink/model.hpp"
#include "qlink/oracle.hpp"
#include "qlink/parallel.hpp"
#include "qlink/sparse.hpp"
#include "qlink/spin.hpp"
