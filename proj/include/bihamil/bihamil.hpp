#pragma once

#include "bihamil/vec3.hpp"
#include "bihamil/error.hpp"
#include "bihamil/expr.hpp"
#include "bihamil/calc3.hpp"
#include "bihamil/frenet.hpp"
#include "bihamil/ode.hpp"
#include "bihamil/riccati.hpp"
#include "bihamil/poisson.hpp"
#include "bihamil/systems.hpp"
#include "bihamil/report.hpp"
