"""Configuración por defecto y carga de archivos de configuración"""
