"""Tests para el motor de riesgo PSP"""