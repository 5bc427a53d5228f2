"""Utilidades compartidas: logging, errores y validadores"""
