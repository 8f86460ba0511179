# Services package for external integrations 